"""Demo problem instances and their text formats.

Kept free of engine imports so that the oracles can share these types
without touching any search or cost code.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field


@dataclass(frozen=True)
class GraphProblem:
    """Weighted digraph with a start vertex, goal set and optional heuristic."""

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    start: str
    goals: frozenset[str]
    h: dict | None = field(default=None, hash=False, compare=False)

    def __post_init__(self):
        vs = set(self.vertices)
        if self.start not in vs:
            raise ValueError(f"start vertex {self.start!r} not in graph")
        if not self.goals or not self.goals <= vs:
            raise ValueError("goal set must be a non-empty subset of the vertices")
        for u, v, w in self.edges:
            if u not in vs or v not in vs:
                raise ValueError(f"edge {u}->{v} mentions an unknown vertex")
            if not (w >= 0 and math.isfinite(w)):
                raise ValueError(f"edge {u}->{v} has invalid weight {w}")
        if self.h is not None:
            for g in self.goals:
                if self.h.get(g, 0.0) != 0.0:
                    raise ValueError(f"heuristic must vanish on goal {g!r}")

    def out_edges(self, u: str) -> list[tuple[str, float]]:
        return [(v, w) for a, v, w in self.edges if a == u]

    def heuristic(self, v: str) -> float:
        return 0.0 if self.h is None else self.h.get(v, 0.0)


@dataclass(frozen=True)
class GameTreeProblem:
    """Complete game tree given as nested tuples of leaf values.

    ``root_max`` makes the first ply maximizing; otherwise plies alternate
    starting with the minimizing side (the cost-minimizing agent).
    """

    tree: tuple | float
    root_max: bool = False

    def __post_init__(self):
        self.depth  # validates completeness

    @property
    def depth(self) -> int:
        def d(t):
            if not isinstance(t, tuple):
                return 0
            if not t:
                raise ValueError("empty inner node")
            ds = {d(c) for c in t}
            if len(ds) != 1:
                raise ValueError("game tree is not complete")
            return 1 + ds.pop()
        return d(self.tree)


@dataclass(frozen=True)
class TspProblem:
    """Symmetric distance matrix over cities 0..m-1; tours start and end at city 0."""

    dist: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = len(self.dist)
        if m < 3:
            raise ValueError("a tour needs at least 3 cities")
        for i, row in enumerate(self.dist):
            if len(row) != m:
                raise ValueError("distance matrix must be square")
            if row[i] != 0:
                raise ValueError("distance matrix must have a zero diagonal")
            for j, x in enumerate(row):
                if x != self.dist[j][i]:
                    raise ValueError("distance matrix must be symmetric")
                if not (x >= 0 and math.isfinite(x)):
                    raise ValueError(f"invalid distance {x}")

    @property
    def m(self) -> int:
        return len(self.dist)


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------


def _lines(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_graph(text: str) -> GraphProblem:
    """``start v`` / ``goal v...`` / ``h v value`` headers and ``u v w`` edge lines."""
    start, goals, edges, h, order = None, set(), [], {}, []

    def see(v):
        if v not in order:
            order.append(v)

    for lineno, f in _lines(text):
        try:
            if f[0] == "start" and len(f) == 2:
                start = f[1]
                see(f[1])
            elif f[0] == "goal" and len(f) >= 2:
                goals.update(f[1:])
                for v in f[1:]:
                    see(v)
            elif f[0] == "h" and len(f) == 3:
                h[f[1]] = float(f[2])
            elif len(f) == 3:
                u, v, w = f[0], f[1], float(f[2])
                see(u)
                see(v)
                edges.append((u, v, w))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"line {lineno}: cannot read {' '.join(f)!r}") from None
    if start is None:
        raise ValueError("graph file has no 'start' line")
    return GraphProblem(tuple(order), tuple(edges), start, frozenset(goals), h or None)


def format_graph(g: GraphProblem) -> str:
    out = [f"start {g.start}", "goal " + " ".join(sorted(g.goals))]
    out += [f"{u} {v} {w!r}" for u, v, w in g.edges]
    if g.h:
        out += [f"h {v} {x!r}" for v, x in sorted(g.h.items())]
    return "\n".join(out) + "\n"


def parse_tsp(text: str) -> TspProblem:
    rows = [tuple(float(x) for x in f) for _, f in _lines(text)]
    return TspProblem(tuple(rows))


def parse_game_tree(text: str) -> GameTreeProblem:
    """Nested parenthesized leaf values, optionally preceded by ``max``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    root_max = False
    if tokens and tokens[0] in ("max", "min"):
        root_max = tokens.pop(0) == "max"
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of game tree")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            kids = []
            while pos < len(tokens) and tokens[pos] != ")":
                kids.append(read())
            if pos >= len(tokens):
                raise ValueError("unbalanced parenthesis in game tree")
            pos += 1
            return tuple(kids)
        if tok == ")":
            raise ValueError("unexpected ')' in game tree")
        return float(tok)

    tree = read()
    if pos != len(tokens):
        raise ValueError("trailing tokens after game tree")
    return GameTreeProblem(tree, root_max)


# ---------------------------------------------------------------------------
# Seeded generators
# ---------------------------------------------------------------------------


def random_graph(seed: int, n_vertices: int = 20, n_edges: int = 60,
                 low: float = 1.0, high: float = 10.0, integral: bool = True) -> GraphProblem:
    """Random digraph in which the last vertex is reachable from the first.

    A random Hamiltonian path guarantees reachability; the remaining edges
    are drawn uniformly without duplicates or self-loops.
    """
    rng = random.Random(seed)
    vs = [f"v{i}" for i in range(n_vertices)]
    order = [vs[0]] + rng.sample(vs[1:-1], n_vertices - 2) + [vs[-1]]
    weight = (lambda: float(rng.randint(int(low), int(high)))) if integral else \
        (lambda: rng.uniform(low, high))
    pairs = {(order[i], order[i + 1]) for i in range(n_vertices - 1)}
    while len(pairs) < min(n_edges, n_vertices * (n_vertices - 1)):
        u, v = rng.sample(vs, 2)
        pairs.add((u, v))
    edges = tuple((u, v, weight()) for u, v in sorted(pairs))
    return GraphProblem(tuple(vs), edges, vs[0], frozenset({vs[-1]}))


def random_game_tree(seed: int, depth: int = 3, branching: int = 2,
                     low: int = 0, high: int = 20) -> GameTreeProblem:
    rng = random.Random(seed)

    def build(d):
        if d == 0:
            return float(rng.randint(low, high))
        return tuple(build(d - 1) for _ in range(branching))

    return GameTreeProblem(build(depth))


def random_tsp(seed: int, m: int, low: int = 1, high: int = 100) -> TspProblem:
    rng = random.Random(seed)
    d = [[0.0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            d[i][j] = d[j][i] = float(rng.randint(low, high))
    return TspProblem(tuple(tuple(r) for r in d))
