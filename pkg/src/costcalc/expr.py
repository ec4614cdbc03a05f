"""Abstract syntax of $-expressions, definition tables and structural helpers.

Every node is a frozen dataclass holding tuples, so expressions are hashable
values that can be shared freely between threads and search-tree nodes.
"""

from __future__ import annotations

import itertools
import random
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .errors import ArityMismatch, UndefinedName

#: Default expansion bound for operators built from an index generator.
INDEX_BOUND = 64


class WeightMode(str, Enum):
    PROBABILITY = "probability"
    FUZZY = "fuzzy"


@dataclass(frozen=True)
class CostWeight:
    """Uncertainty weight attached to one branch of a general choice."""

    mode: WeightMode
    w: float

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"weight {self.w} outside [0, 1]")


# ---------------------------------------------------------------------------
# Simple $-expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cost:
    children: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Send:
    channel: str
    children: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Receive:
    channel: str
    vars: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.vars)) != len(self.vars):
            raise ValueError(f"duplicate receive variables in {self.vars}")


@dataclass(frozen=True)
class Suppress:
    children: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class SimpleCall:
    name: str
    args: tuple[Expr, ...] = ()
    negated: bool = False


# ---------------------------------------------------------------------------
# Composite $-expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Seq:
    head: Expr
    tail: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Par:
    children: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class CostChoice:
    children: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class AdvChoice:
    children: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class GenChoice:
    branches: tuple[tuple[CostWeight, Expr], ...] = ()

    @property
    def children(self) -> tuple[Expr, ...]:
        return tuple(child for _, child in self.branches)


@dataclass(frozen=True)
class ProcCall:
    name: str
    args: tuple[Expr, ...] = ()
    force_once: bool = False


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Epsilon:
    pass


@dataclass(frozen=True)
class Var:
    name: str


Expr = Union[
    Cost, Send, Receive, Suppress, SimpleCall,
    Seq, Par, CostChoice, AdvChoice, GenChoice, ProcCall,
    Bottom, Epsilon, Var,
]

BOT = Bottom()
EPS = Epsilon()

SIMPLE_KINDS = (Cost, Send, Receive, Suppress, SimpleCall)
CHOICE_KINDS = (CostChoice, AdvChoice, GenChoice)
_CHILD_KINDS = (Cost, Send, Suppress, Par, CostChoice, AdvChoice)


def is_simple(e: Expr) -> bool:
    return isinstance(e, SIMPLE_KINDS)


def seq(*parts: Expr) -> Expr:
    """Sequential composition of ``parts``; ``seq()`` is ε."""
    if not parts:
        return EPS
    return Seq(parts[0], tuple(parts[1:]))


def call(name: str, *args: Expr) -> SimpleCall:
    return SimpleCall(name, tuple(args))


def uniform(*children: Expr, mode: WeightMode = WeightMode.PROBABILITY) -> GenChoice:
    if not children:
        return GenChoice(())
    w = 1.0 / len(children)
    return GenChoice(tuple((CostWeight(mode, w), c) for c in children))


def from_generator(kind: type, gen: Callable[[int], Expr] | Iterable[Expr],
                   bound: int = INDEX_BOUND) -> Expr:
    """Build a composite over a (possibly infinite) index set, truncated to ``bound``.

    ``gen`` is either a function of the index or an iterable; only the first
    ``bound`` children are materialized.
    """
    if callable(gen):
        items = (gen(i) for i in itertools.count())
    else:
        items = iter(gen)
    children = tuple(itertools.islice(items, bound))
    if kind is GenChoice:
        return uniform(*children)
    if kind is Seq:
        return seq(*children)
    return kind(children)


def children_of(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, _CHILD_KINDS):
        return e.children
    if isinstance(e, GenChoice):
        return e.children
    if isinstance(e, Seq):
        return (e.head,) + e.tail
    if isinstance(e, (SimpleCall, ProcCall)):
        return e.args
    return ()


def with_children(e: Expr, kids: tuple[Expr, ...]) -> Expr:
    """Rebuild ``e`` with ``kids`` in place of ``children_of(e)``."""
    if isinstance(e, Send):
        return Send(e.channel, kids)
    if isinstance(e, _CHILD_KINDS):
        return type(e)(kids)
    if isinstance(e, GenChoice):
        return GenChoice(tuple((w, k) for (w, _), k in zip(e.branches, kids)))
    if isinstance(e, Seq):
        return Seq(kids[0], kids[1:])
    if isinstance(e, SimpleCall):
        return SimpleCall(e.name, kids, e.negated)
    if isinstance(e, ProcCall):
        return ProcCall(e.name, kids, e.force_once)
    return e


def size(e: Expr) -> int:
    """Number of nodes in ``e`` (weights and names are not nodes)."""
    return 1 + sum(size(c) for c in children_of(e))


def subterms(e: Expr, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Expr]]:
    """Pre-order walk yielding ``(path, subexpression)`` pairs."""
    yield path, e
    for i, c in enumerate(children_of(e)):
        yield from subterms(c, path + (i,))


def replace_at(e: Expr, path: tuple[int, ...], new: Expr) -> Expr:
    if not path:
        return new
    kids = list(children_of(e))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(e, tuple(kids))


def names_in(e: Expr) -> set[str]:
    """Call names (simple and process) occurring in ``e``."""
    out = set()
    for _, sub in subterms(e):
        if isinstance(sub, (SimpleCall, ProcCall)):
            out.add(sub.name)
    return out


def channels_in(e: Expr) -> set[str]:
    return {sub.channel for _, sub in subterms(e) if isinstance(sub, (Send, Receive))}


# ---------------------------------------------------------------------------
# Normalization and equality
# ---------------------------------------------------------------------------


def normalize_node(e: Expr) -> Expr:
    """Apply the empty-operator conventions at the root only."""
    if isinstance(e, (Par, CostChoice, AdvChoice)) and not e.children:
        return BOT
    if isinstance(e, GenChoice) and not e.branches:
        return BOT
    if isinstance(e, Seq) and not e.tail and isinstance(e.head, Epsilon):
        return EPS
    return e


def normalize(e: Expr) -> Expr:
    kids = children_of(e)
    if kids:
        e = with_children(e, tuple(normalize(c) for c in kids))
    return normalize_node(e)


def structural_equal(a: Expr, b: Expr) -> bool:
    return normalize(a) == normalize(b)


# ---------------------------------------------------------------------------
# Variables and substitution
# ---------------------------------------------------------------------------


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Seq) and isinstance(e.head, Receive):
        bound = set(e.head.vars)
        inner = set()
        for t in e.tail:
            inner |= free_vars(t)
        return inner - bound
    out = set()
    for c in children_of(e):
        out |= free_vars(c)
    return out


def is_closed(e: Expr) -> bool:
    return not free_vars(e)


_fresh_counter = itertools.count()


def _fresh(base: str, avoid: set[str]) -> str:
    while True:
        cand = f"{base}_{next(_fresh_counter)}"
        if cand not in avoid:
            return cand


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Capture-avoiding replacement of free variables.

    Receive variables bind in the tail of the sequence whose head they are;
    binders that would capture a free variable of a substituted value are
    renamed first.
    """
    if not bindings:
        return e
    if isinstance(e, Var):
        return bindings.get(e.name, e)
    if isinstance(e, Seq) and isinstance(e.head, Receive):
        recv = e.head
        inner = {k: v for k, v in bindings.items() if k not in recv.vars}
        if not inner:
            return e
        incoming = set()
        for v in inner.values():
            incoming |= free_vars(v)
        tail = e.tail
        if incoming & set(recv.vars):
            avoid = incoming | set(inner)
            for t in tail:
                avoid |= free_vars(t)
            rename = {}
            for x in recv.vars:
                if x in incoming:
                    rename[x] = _fresh(x, avoid)
                    avoid.add(rename[x])
            recv = Receive(recv.channel, tuple(rename.get(x, x) for x in recv.vars))
            tail = tuple(substitute(t, {x: Var(y) for x, y in rename.items()}) for t in tail)
        return Seq(recv, tuple(substitute(t, inner) for t in tail))
    kids = children_of(e)
    if not kids:
        return e
    return with_children(e, tuple(substitute(c, bindings) for c in kids))


# ---------------------------------------------------------------------------
# Definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Definition:
    """``(:= (name params...) body)``.

    ``atomic`` is true for definitions of simple $-expressions, whose body is
    itself simple and fires as one indivisible step.
    """

    name: str
    params: tuple[str, ...]
    body: Expr
    atomic: bool = False

    def __post_init__(self):
        if len(set(self.params)) != len(self.params):
            raise ValueError(f"duplicate parameters in definition of {self.name}")
        extra = free_vars(self.body) - set(self.params)
        if extra:
            raise ValueError(f"definition of {self.name} has free variables {sorted(extra)}")

    @classmethod
    def make(cls, name: str, params: Iterable[str], body: Expr) -> Definition:
        return cls(name, tuple(params), body, atomic=is_simple(body))


@dataclass(frozen=True, eq=False)
class DefTable:
    """Named definitions plus the per-agent alphabet partition.

    ``definitions`` may be any Mapping, including a lazy one that generates
    members of an unbounded definition family on demand.
    """

    definitions: Mapping[str, Definition] = field(default_factory=dict)
    alphabets: Mapping[object, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        seen: dict[str, object] = {}
        for agent, names in self.alphabets.items():
            for n in names:
                if n in seen and seen[n] != agent:
                    raise ValueError(f"name {n!r} owned by agents {seen[n]!r} and {agent!r}")
                seen[n] = agent

    def __contains__(self, name: str) -> bool:
        return name in self.definitions

    def get(self, name: str) -> Definition | None:
        return self.definitions.get(name)

    def lookup(self, name: str) -> Definition:
        d = self.definitions.get(name)
        if d is None:
            raise UndefinedName(f"undefined name {name!r}")
        return d

    def with_definition(self, d: Definition) -> DefTable:
        defs = dict(self.definitions)
        defs[d.name] = d
        return DefTable(defs, self.alphabets)

    def merged(self, other: DefTable) -> DefTable:
        defs = dict(self.definitions)
        defs.update(other.definitions)
        alph = dict(self.alphabets)
        alph.update(other.alphabets)
        return DefTable(defs, alph)

    def with_alphabet(self, agent, names: Iterable[str]) -> DefTable:
        alph = dict(self.alphabets)
        alph[agent] = frozenset(names)
        return DefTable(self.definitions, alph)

    def owner(self, name: str):
        for agent, names in self.alphabets.items():
            if name in names:
                return agent
        return None


EMPTY_DEFS = DefTable()


def _strip_self_calls(e: Expr, name: str) -> Expr:
    if isinstance(e, (ProcCall, SimpleCall)) and e.name == name:
        return EPS
    kids = children_of(e)
    if not kids:
        return e
    return with_children(e, tuple(_strip_self_calls(c, name) for c in kids))


def expand_call(e: ProcCall | SimpleCall, defs: DefTable) -> Expr:
    """Replace a defined call by its body with parameters bound to arguments.

    Nothing is evaluated. A force-once call has its recursive self-calls cut
    to ε, so the body runs exactly one time.
    """
    d = defs.lookup(e.name)
    if len(d.params) != len(e.args):
        raise ArityMismatch(
            f"{e.name} expects {len(d.params)} argument(s), got {len(e.args)}")
    body = substitute(d.body, dict(zip(d.params, e.args)))
    if isinstance(e, ProcCall) and e.force_once:
        body = _strip_self_calls(body, e.name)
    return body


# ---------------------------------------------------------------------------
# Random expressions (genetic-programming seeds and mutation material)
# ---------------------------------------------------------------------------


def random_expr(rng: random.Random, names: Iterable[str], depth: int = 2) -> Expr:
    """A random closed expression over simple calls to ``names``."""
    pool = sorted(names) or ["a"]
    if depth <= 0 or rng.random() < 0.3:
        return SimpleCall(rng.choice(pool))
    n = rng.randint(2, 3)
    kids = tuple(random_expr(rng, pool, depth - 1) for _ in range(n))
    kind = rng.choice(("seq", "par", "cchoice", "achoice", "gchoice"))
    if kind == "seq":
        return Seq(kids[0], kids[1:])
    if kind == "par":
        return Par(kids)
    if kind == "cchoice":
        return CostChoice(kids)
    if kind == "achoice":
        return AdvChoice(kids)
    return uniform(*kids)
