"""Brute-force reference solvers used by the test-suite.

Nothing here imports the engine (expr, lts, cost, komega, encodings); the
only shared code is the plain problem records in :mod:`costcalc.problems`.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import networkx as nx

from .problems import GameTreeProblem, GraphProblem, TspProblem

TSP_LIMIT = 10


class Unreachable(Exception):
    pass


class TooLarge(Exception):
    pass


@dataclass(frozen=True)
class OracleResult:
    value: float
    witness: object = None


def dijkstra(g: GraphProblem) -> OracleResult:
    """Exact shortest path cost from the start to the nearest goal."""
    graph = nx.DiGraph()
    graph.add_nodes_from(g.vertices)
    for u, v, w in g.edges:
        # parallel edges: keep the cheapest
        if not graph.has_edge(u, v) or graph[u][v]["weight"] > w:
            graph.add_edge(u, v, weight=w)
    dist, paths = nx.single_source_dijkstra(graph, g.start, weight="weight")
    reached = [(dist[t], t) for t in g.goals if t in dist]
    if not reached:
        raise Unreachable(f"no goal reachable from {g.start!r}")
    value, goal = min(reached)
    return OracleResult(value, tuple(paths[goal]))


def brute_minimax(t: GameTreeProblem) -> OracleResult:
    def backup(node, maximizing):
        if not isinstance(node, tuple):
            return node
        vals = [backup(c, not maximizing) for c in node]
        return max(vals) if maximizing else min(vals)

    return OracleResult(backup(t.tree, t.root_max))


def brute_tsp(p: TspProblem) -> OracleResult:
    """Optimum over all (m-1)! tours from city 0."""
    m = p.m
    if m > TSP_LIMIT:
        raise TooLarge(f"{m} cities exceed the brute-force limit of {TSP_LIMIT}")
    best, witness = math.inf, None
    for perm in itertools.permutations(range(1, m)):
        tour = (0,) + perm + (0,)
        cost = sum(p.dist[a][b] for a, b in zip(tour, tour[1:]))
        if cost < best:
            best, witness = cost, tour
    return OracleResult(best, witness)


def enumerate_schedules(agents: Sequence[Sequence[Sequence[str]]],
                        max_steps: int) -> set[tuple[frozenset, ...]]:
    """All interleavings of independent agents, each running one of its alternative chains.

    ``agents[i]`` lists the alternatives of agent ``i`` (a single chain, or
    the branches of a random choice), each a sequence of labels. A step is
    any non-empty set of live agents firing their next label together.
    Returned schedules are tuples of ``frozenset((agent, label), ...)`` that
    either end with every agent finished or have length ``max_steps``.
    """
    out: set = set()
    # agent state: None = not yet committed to a branch, else (branch, position)
    start = tuple(None for _ in agents)

    def options(i, st):
        alts = agents[i]
        if st is None:
            return [((b, 1), alts[b][0]) for b in range(len(alts)) if alts[b]]
        b, pos = st
        if pos < len(alts[b]):
            return [((b, pos + 1), alts[b][pos])]
        return []

    def walk(state, prefix):
        live = [i for i in range(len(agents)) if options(i, state[i])]
        if not live or len(prefix) == max_steps:
            out.add(prefix)
            return
        for r in range(1, len(live) + 1):
            for group in itertools.combinations(live, r):
                for picks in itertools.product(*(options(i, state[i]) for i in group)):
                    nxt = list(state)
                    step = []
                    for i, (st, label) in zip(group, picks):
                        nxt[i] = st
                        step.append((i, label))
                    walk(tuple(nxt), prefix + (frozenset(step),))

    walk(start, ())
    return out
