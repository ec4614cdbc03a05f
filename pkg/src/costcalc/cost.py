"""Cost semantics: atomic cost tables, compositional metrics, $1/$2/$3 and RL profiling."""

from __future__ import annotations

import math
import random
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType

from .errors import InvalidWeights, ReservedName, UnknownLabel
from .expr import (
    AdvChoice, Bottom, Cost, CostChoice, CostWeight, DefTable, Epsilon, Expr,
    GenChoice, Par, ProcCall, Receive, Send, Seq, SimpleCall, Suppress, Var,
    WeightMode, expand_call,
)

CostValue = float
INF = math.inf

STANDARD = "standard"
#: Expansion depth after which a chain of nested calls is priced as divergent.
CALL_DEPTH_LIMIT = 64


def check_cost(v: float) -> float:
    if math.isnan(v):
        raise ValueError("cost must not be NaN")
    return v


# ---------------------------------------------------------------------------
# Atomic cost tables
# ---------------------------------------------------------------------------


def base_label(label: str) -> str:
    """Strip an agent suffix (``name@3`` -> ``name``)."""
    return label.split("@", 1)[0]


def negated_label(name: str) -> str:
    return "~" + name


@dataclass(frozen=True)
class CostTable:
    """Costs of simple labels.

    ``default`` is the cost of labels missing from the table, or ``None`` to
    make lookups of unknown labels an error. ``alpha``/``gamma`` parameterize
    reinforcement-learning updates of the stored estimates.
    """

    costs: Mapping[str, float] = field(default_factory=dict)
    default: float | None = 0.0
    weights: Mapping[str, CostWeight] = field(default_factory=dict)
    alpha: float = 0.1
    gamma: float = 0.0

    def __post_init__(self):
        for label, v in self.costs.items():
            if not math.isfinite(v):
                raise ValueError(f"stored cost of {label!r} must be finite, got {v}")

    def __contains__(self, label: str) -> bool:
        return label in self.costs or base_label(label) in self.costs

    def lookup(self, label: str) -> float:
        if label in self.costs:
            return self.costs[label]
        base = base_label(label)
        if base in self.costs:
            return self.costs[base]
        if self.default is None:
            raise UnknownLabel(f"no cost for label {label!r}")
        return self.default

    def with_cost(self, label: str, value: float) -> CostTable:
        costs = dict(self.costs)
        costs[label] = check_cost(float(value))
        return replace(self, costs=costs)


def random_costs(rng: random.Random, labels: Iterable[str], low: float = 0.0,
                 high: float = 10.0, **kw) -> CostTable:
    return CostTable({lab: rng.uniform(low, high) for lab in sorted(labels)}, **kw)


def load_cost_table(text: str) -> CostTable:
    """Read the ``label<TAB>cost[<TAB>p=w|f=w]`` format with an optional ``default=`` header."""
    costs, weights = {}, {}
    default: float | None = 0.0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("default="):
            val = line[len("default="):].strip()
            default = None if val == "error" else float(val)
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise ValueError(f"line {lineno}: expected 'label cost [p=w|f=w]'")
        costs[fields[0]] = float(fields[1])
        if len(fields) == 3:
            tag, _, w = fields[2].partition("=")
            mode = {"p": WeightMode.PROBABILITY, "f": WeightMode.FUZZY}.get(tag)
            if mode is None:
                raise ValueError(f"line {lineno}: weight must be p=<w> or f=<w>")
            weights[fields[0]] = CostWeight(mode, float(w))
    return CostTable(costs, default, weights)


def dump_cost_table(t: CostTable) -> str:
    lines = ["default=" + ("error" if t.default is None else repr(t.default))]
    for label in sorted(t.costs):
        line = f"{label}\t{t.costs[label]!r}"
        w = t.weights.get(label)
        if w is not None:
            line += f"\t{'p' if w.mode is WeightMode.PROBABILITY else 'f'}={w.w!r}"
        lines.append(line)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Metric registry
# ---------------------------------------------------------------------------

Combinator = Callable[[Sequence[float], Sequence[CostWeight] | None], float]

OPERATOR_KINDS = ("cost", "seq", "par", "cchoice", "achoice", "gchoice")


def _wmul(w: float, c: float) -> float:
    # 0 * inf is taken as 0: a branch with zero weight contributes nothing
    return 0.0 if w == 0.0 else w * c


def _sum(costs, weights=None):
    return sum(costs, 0.0)


def _min(costs, weights=None):
    return min(costs, default=INF)


def _max(costs, weights=None):
    return max(costs, default=INF)


def _general(costs, weights):
    if not costs:
        return INF
    if weights[0].mode is WeightMode.PROBABILITY:
        return sum((_wmul(w.w, c) for w, c in zip(weights, costs)), 0.0)
    best = max(range(len(costs)), key=lambda i: _wmul(weights[i].w, costs[i]))
    return costs[best]


STANDARD_METRIC: Mapping[str, Combinator] = MappingProxyType({
    "cost": _sum, "seq": _sum, "par": _sum,
    "cchoice": _min, "achoice": _max, "gchoice": _general,
})


@dataclass(frozen=True)
class MetricRegistry:
    """Named metric sets, each a partial map from operator kind to combinator.

    Operators a set does not mention fall through to the standard metric,
    which is always present and cannot be replaced.
    """

    sets: Mapping[str, Mapping[str, Combinator]] = field(
        default_factory=lambda: {STANDARD: STANDARD_METRIC})

    def combinator(self, metric: str, kind: str) -> Combinator:
        chosen = self.sets.get(metric)
        if chosen is None:
            raise KeyError(f"unknown metric set {metric!r}")
        return chosen.get(kind) or STANDARD_METRIC[kind]

    @property
    def names(self) -> list[str]:
        return sorted(self.sets)


def register_metric(r: MetricRegistry, name: str, kind: str,
                    combinator: Combinator) -> MetricRegistry:
    if name == STANDARD:
        raise ReservedName("the standard metric set cannot be modified in place")
    if kind not in OPERATOR_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
    sets = dict(r.sets)
    entry = dict(sets.get(name, {}))
    entry[kind] = combinator
    sets[name] = MappingProxyType(entry)
    return MetricRegistry(sets)


def default_registry() -> MetricRegistry:
    """Standard metric plus ``makespan``, which prices parallel composition by its slowest branch."""
    return register_metric(MetricRegistry(), "makespan", "par", _max)


# ---------------------------------------------------------------------------
# Expression cost
# ---------------------------------------------------------------------------


def validate_weights(weights: Sequence[CostWeight]) -> None:
    if not weights:
        return
    modes = {w.mode for w in weights}
    if len(modes) > 1:
        raise InvalidWeights("general choice mixes probability and fuzzy weights")
    if weights[0].mode is WeightMode.PROBABILITY:
        total = math.fsum(w.w for w in weights)
        if abs(total - 1.0) > 1e-9:
            raise InvalidWeights(f"probability weights sum to {total}, expected 1")


def expr_cost(e: Expr, table: CostTable, registry: MetricRegistry | None = None,
              metric: str = STANDARD, defs: DefTable | None = None) -> CostValue:
    """Cost of ``e`` under ``metric``.

    Simple labels are priced by ``table``. A communication is charged once,
    on the sending side. Defined calls are priced through their bodies;
    a call that re-enters itself with the same arguments costs +inf.
    """
    registry = registry or MetricRegistry()
    defs = defs or DefTable()
    comb = lambda kind: registry.combinator(metric, kind)  # noqa: E731
    active: set = set()

    def c(e: Expr, depth: int) -> float:
        if isinstance(e, Epsilon):
            return 0.0
        if isinstance(e, Bottom):
            return INF
        if isinstance(e, Var):
            raise ValueError(f"cannot price open expression: free variable {e.name!r}")
        if isinstance(e, Cost):
            return comb("cost")([c(x, depth) for x in e.children], None)
        if isinstance(e, Send):
            return table.lookup(e.channel)
        if isinstance(e, (Receive, Suppress)):
            return 0.0
        if isinstance(e, SimpleCall):
            if e.negated:
                return table.lookup(negated_label(e.name))
            if e.name in table or e.name not in defs:
                return table.lookup(e.name)
            return through_definition(e, depth)
        if isinstance(e, ProcCall):
            return through_definition(e, depth)
        if isinstance(e, Seq):
            return comb("seq")([c(x, depth) for x in (e.head,) + e.tail], None)
        if isinstance(e, Par):
            return comb("par")([c(x, depth) for x in e.children], None)
        if isinstance(e, CostChoice):
            return comb("cchoice")([c(x, depth) for x in e.children], None)
        if isinstance(e, AdvChoice):
            return comb("achoice")([c(x, depth) for x in e.children], None)
        if isinstance(e, GenChoice):
            weights = [w for w, _ in e.branches]
            validate_weights(weights)
            return comb("gchoice")([c(x, depth) for _, x in e.branches], weights)
        raise TypeError(f"not an expression: {e!r}")

    def through_definition(e, depth):
        key = (e.name, e.args)
        if key in active or depth >= CALL_DEPTH_LIMIT:
            return INF
        active.add(key)
        try:
            return c(expand_call(e, defs), depth + 1)
        finally:
            active.discard(key)

    return check_cost(c(e, 0))


# ---------------------------------------------------------------------------
# $1 aggregation
# ---------------------------------------------------------------------------


class AggMode(str, Enum):
    ADDITION = "addition"
    WEIGHTED = "weighted"
    IDENTITY = "identity"


@dataclass(frozen=True)
class Aggregator:
    mode: AggMode = AggMode.ADDITION
    w_search: float = 1.0
    w_solution: float = 1.0

    @classmethod
    def addition(cls) -> Aggregator:
        return cls(AggMode.ADDITION)

    @classmethod
    def weighted(cls, w_search: float, w_solution: float) -> Aggregator:
        return cls(AggMode.WEIGHTED, w_search, w_solution)

    @classmethod
    def identity(cls) -> Aggregator:
        return cls(AggMode.IDENTITY)


def aggregate(search_cost: float, solution_cost: float,
              agg: Aggregator = Aggregator()) -> float | tuple[float, float]:
    """Combine search cost ($2) and solution cost ($3) into the total cost ($1).

    The identity aggregator keeps the pair, giving Pareto comparison.
    """
    if agg.mode is AggMode.IDENTITY:
        return (search_cost, solution_cost)
    if agg.mode is AggMode.WEIGHTED:
        return _wmul(agg.w_search, search_cost) + _wmul(agg.w_solution, solution_cost)
    return search_cost + solution_cost


def scalar_key(value: float | tuple[float, float]) -> tuple[float, ...]:
    """Total order used for elitism: scalars compare directly, pairs lexicographically by solution then search cost."""
    if isinstance(value, tuple):
        return (value[1], value[0])
    return (value,)


# ---------------------------------------------------------------------------
# Reinforcement-learning cost profiling
# ---------------------------------------------------------------------------


def rl_update(t: CostTable, transition: tuple[str, float, float]) -> CostTable:
    """One temporal-difference step on the stored cost estimate of a label.

    ``Q <- Q + alpha * (observed + gamma * next_best - Q)``
    """
    label, observed, next_best = transition
    if not 0.0 < t.alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {t.alpha}")
    if not 0.0 <= t.gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {t.gamma}")
    q = t.costs.get(label, t.default if t.default is not None else 0.0)
    target = observed + (t.gamma * next_best if t.gamma else 0.0)
    return t.with_cost(label, q + t.alpha * (target - q))
