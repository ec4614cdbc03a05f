"""Classic search algorithms as $-expressions plus kΩ parameter settings.

Each encoder returns ``(program, overrides)`` where ``overrides`` is ready
for :func:`costcalc.komega.run` (it carries the definitions, cost table and
estimator as well as ``k``, ``b``, ``n``).
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass

from .cost import CostTable
from .expr import (
    BOT, EPS, AdvChoice, CostChoice, DefTable, Definition, Expr, ProcCall, Seq,
    SimpleCall,
)
from .lts import Config
from .problems import GameTreeProblem, GraphProblem, TspProblem

INF = math.inf
#: Largest TSP instance searched exhaustively; bigger ones run elitist restarts.
TSP_COMPLETE_LIMIT = 9

_SAFE = re.compile(r"[^A-Za-z0-9_]")


def _tok(v: str) -> str:
    return _SAFE.sub("_", v)


def vertex_name(v: str) -> str:
    return f"at_{_tok(v)}"


def edge_label(u: str, v: str) -> str:
    return f"go_{_tok(u)}_{_tok(v)}"


@dataclass(frozen=True)
class NamedEstimate:
    """Strong-ε estimator reading the pending process call of an agent.

    A configuration whose agent is about to enter ``name`` is priced at
    ``values[name]``; a terminated agent at 0.
    """

    values: Mapping[str, float]
    agent: object = 0

    def __call__(self, config: Config) -> float:
        e = config.expr(self.agent)
        while isinstance(e, Seq):
            e = e.head
        if isinstance(e, (ProcCall, SimpleCall)):
            return self.values.get(e.name, 0.0)
        return 0.0


def _graph_program(g: GraphProblem):
    best: dict[tuple[str, str], float] = {}
    for u, v, w in g.edges:
        if (u, v) not in best or w < best[(u, v)]:
            best[(u, v)] = w
    names = {vertex_name(v) for v in g.vertices}
    if len(names) != len(g.vertices):
        raise ValueError("vertex names collide after sanitizing")
    defs = {}
    for v in g.vertices:
        if v in g.goals:
            body = EPS
        else:
            out = [(t, w) for (s, t), w in best.items() if s == v]
            if out:
                body = CostChoice(tuple(Seq(SimpleCall(edge_label(v, t)), (ProcCall(vertex_name(t)),))
                                        for t, _ in out))
            else:
                body = BOT
        defs[vertex_name(v)] = Definition(vertex_name(v), (), body, atomic=False)
    costs = CostTable({edge_label(u, v): w for (u, v), w in best.items()})
    h = {vertex_name(v): g.heuristic(v) for v in g.vertices}
    return ProcCall(vertex_name(g.start)), DefTable(defs), costs, h


def encode_astar(g: GraphProblem, horizon: int = 1) -> tuple[Expr, dict]:
    """Best-first search: offline (``n=0``) with the heuristic as strong-ε estimate.

    Each cycle expands the cheapest frontier leaf ``horizon`` plies deep;
    the path runs only once the cheapest leaf is a goal.
    """
    program, defs, costs, h = _graph_program(g)
    return program, {
        "defs": defs, "costs": costs, "k": horizon, "b": INF, "n": 0,
        "strongcong": True, "eps_estimator": NamedEstimate(h),
        "iteration_budget": 1_000_000,
    }


def encode_hillclimb(g: GraphProblem) -> tuple[Expr, dict]:
    """Greedy online descent: look one step ahead, keep the single best child, take it."""
    program, defs, costs, h = _graph_program(g)
    return program, {
        "defs": defs, "costs": costs, "k": 1, "b": 1, "n": 1,
        "strongcong": True, "eps_estimator": NamedEstimate(h),
        "iteration_budget": 10 * max(1, len(g.vertices)),
    }


def encode_minimax(t: GameTreeProblem) -> tuple[Expr, dict]:
    """Alternating cost/adversary choices; only the last ply's moves carry the leaf values."""
    costs = {}

    def build(node, path, maximizing):
        kind = AdvChoice if maximizing else CostChoice
        branches = []
        for i, child in enumerate(node):
            here = path + (i,)
            suffix = "_".join(map(str, here))
            if isinstance(child, tuple):
                label = f"m_{suffix}"
                branches.append(Seq(SimpleCall(label), (build(child, here, not maximizing),)))
            else:
                label = f"leaf_{suffix}"
                costs[label] = float(child)
                branches.append(SimpleCall(label))
        return kind(tuple(branches))

    if not isinstance(t.tree, tuple):
        raise ValueError("game tree needs at least one ply")
    program = build(t.tree, (), t.root_max)
    return program, {"costs": CostTable(costs), "k": t.depth, "b": INF, "n": 0}


class TspDefinitions(Mapping):
    """The family ``t_<city>_<visited mask>`` generated on first use.

    ``t_c_S`` is the cheapest completion of a partial tour standing at city
    ``c`` having visited the set ``S``: a cost choice over unvisited cities,
    or the closing edge back to city 0 once everything is visited.
    """

    def __init__(self, m: int):
        self.m = m
        self.full = (1 << m) - 1
        self._cache: dict[str, Definition] = {}

    @staticmethod
    def name(city: int, mask: int) -> str:
        return f"t_{city}_{mask}"

    def _parse(self, key):
        parts = key.split("_") if isinstance(key, str) else ()
        if len(parts) != 3 or parts[0] != "t" or not parts[1].isdigit() or not parts[2].isdigit():
            return None
        city, mask = int(parts[1]), int(parts[2])
        if city >= self.m or mask > self.full or not mask & 1 or not mask >> city & 1:
            return None
        return city, mask

    def __getitem__(self, key):
        d = self._cache.get(key)
        if d is not None:
            return d
        parsed = self._parse(key)
        if parsed is None:
            raise KeyError(key)
        city, mask = parsed
        if mask == self.full:
            # wrapped in a sequence so the definition reads back as a process
            body = Seq(SimpleCall(tsp_label(city, 0)), ())
        else:
            body = CostChoice(tuple(
                Seq(SimpleCall(tsp_label(city, j)), (ProcCall(self.name(j, mask | 1 << j)),))
                for j in range(self.m) if not mask >> j & 1))
        d = Definition(key, (), body, atomic=False)
        self._cache[key] = d
        return d

    def __iter__(self):
        for mask in range(1, self.full + 1, 2):
            for city in range(self.m):
                if mask >> city & 1:
                    yield self.name(city, mask)

    def __len__(self):
        return (1 << (self.m - 1)) + (self.m - 1) * (1 << (self.m - 2))

    def __contains__(self, key):
        return self._parse(key) is not None


def tsp_label(i: int, j: int) -> str:
    return f"d_{i}_{j}"


def encode_tsp(p: TspProblem, seed_iterations: int = 200) -> tuple[Expr, dict]:
    """Tour construction as nested cost choices from city 0.

    Up to :data:`TSP_COMPLETE_LIMIT` cities the whole tree is searched
    offline. Larger instances run short-horizon online episodes that restart
    after every completed tour, keeping the best tour found (elitism).
    """
    m = p.m
    defs = DefTable(TspDefinitions(m))
    costs = CostTable({tsp_label(i, j): p.dist[i][j] for i in range(m) for j in range(m) if i != j})
    program = ProcCall(TspDefinitions.name(0, 1))
    if m <= TSP_COMPLETE_LIMIT:
        return program, {"defs": defs, "costs": costs, "k": INF, "b": INF, "n": 0}
    return program, {
        "defs": defs, "costs": costs, "k": 2, "b": 3, "n": 1,
        "restart_on_goal": True, "iteration_budget": seed_iterations,
        "search_unit_cost": 0.0,
    }
