"""Labeled transition system over configurations of agents.

A configuration maps agent ids to $-expressions. Before transitions are read
off an expression it is brought to head form: defined calls at active
positions are unfolded and finished sequence heads are dropped. Unfolding is
not a transition of its own.

Choices commit on the first action of a branch. A parallel step fires any
set of independent actions at once, across threads of one agent and across
agents. A send and a matching receive form one communication step.
"""

from __future__ import annotations

import functools
import itertools
import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .cost import CostTable, MetricRegistry, STANDARD, expr_cost, negated_label
from .errors import IllegalAction
from .expr import (
    BOT, EPS, AdvChoice, Bottom, Cost, CostChoice, CostWeight, DefTable,
    Epsilon, Expr, GenChoice, Par, ProcCall, Receive, Send, Seq, SimpleCall,
    Suppress, Var, expand_call, free_vars, substitute,
)

#: Cap on the number of actions offered by one configuration.
C_MAX = 256
#: Nested unfoldings of unguarded calls beyond this depth block.
UNFOLD_LIMIT = 64

AgentId = object
Path = tuple[int, ...]


@dataclass(frozen=True)
class ChoiceStep:
    """One choice resolved by an action: where it sits and which branch was taken."""

    position: Path
    kind: str  # "cchoice" | "achoice" | "gchoice"
    branch: int
    weight: CostWeight | None = None


@dataclass(frozen=True)
class Item:
    """One simple label fired within a step.

    ``kind`` is ``act`` for simple expressions, ``eps`` for a silent ε branch
    of a choice and ``comm`` for a matched send/receive pair. For ``comm``
    the sender is ``agent`` and the receiver ``partner``.
    """

    agent: AgentId
    kind: str
    label: str
    path: Path
    expr: Expr | None = None
    partner: AgentId | None = None
    partner_path: Path | None = None

    def agents(self) -> tuple:
        return (self.agent,) if self.partner is None else (self.agent, self.partner)


@dataclass(frozen=True)
class Action:
    """A multiset of simple labels executed together as one elementary step."""

    items: tuple[Item, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(it.label for it in self.items)

    def involves(self, agent: AgentId) -> bool:
        return any(agent in it.agents() for it in self.items)

    def __str__(self):
        return "{" + ", ".join(f"{it.agent}:{it.label}" for it in self.items) + "}"


@dataclass(frozen=True)
class Config:
    agents: tuple[tuple[AgentId, Expr], ...]
    defs: DefTable = DefTable()

    def __post_init__(self):
        ids = [a for a, _ in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError(f"agent ids must be unique, got {ids}")
        for a, e in self.agents:
            fv = free_vars(e)
            if fv:
                raise ValueError(f"agent {a!r} holds an open expression (free {sorted(fv)})")

    @classmethod
    def of(cls, *programs: Expr, defs: DefTable | None = None) -> Config:
        return cls(tuple(enumerate(programs)), defs or DefTable())

    def expr(self, agent: AgentId) -> Expr:
        for a, e in self.agents:
            if a == agent:
                return e
        raise KeyError(agent)

    def with_expr(self, agent: AgentId, e: Expr) -> Config:
        return Config(tuple((a, e if a == agent else x) for a, x in self.agents), self.defs)

    def terminated(self, agent: AgentId | None = None) -> bool:
        if agent is not None:
            return isinstance(head_form(self.expr(agent), self.defs), Epsilon)
        return all(isinstance(head_form(e, self.defs), Epsilon) for _, e in self.agents)


# ---------------------------------------------------------------------------
# Head forms
# ---------------------------------------------------------------------------


def _unfolds(e: Expr, defs: DefTable) -> bool:
    return isinstance(e, ProcCall) or (
        isinstance(e, SimpleCall) and not e.negated and e.name in defs)


def _head(e: Expr, defs: DefTable, expand: bool, depth: int) -> Expr:
    if expand and _unfolds(e, defs):
        if depth >= UNFOLD_LIMIT:
            return BOT
        return _head(expand_call(e, defs), defs, expand, depth + 1)
    if isinstance(e, Seq):
        h = _head(e.head, defs, expand, depth)
        if isinstance(h, Epsilon):
            if not e.tail:
                return EPS
            return _head(Seq(e.tail[0], e.tail[1:]), defs, expand, depth)
        if isinstance(h, Bottom):
            return BOT
        if not e.tail:
            return h
        return Seq(h, e.tail)
    if isinstance(e, Par):
        if not e.children:
            return BOT
        kids = [_head(c, defs, expand, depth) for c in e.children]
        kids = [k for k in kids if not isinstance(k, Epsilon)]
        if not kids:
            return EPS
        return kids[0] if len(kids) == 1 else Par(tuple(kids))
    if isinstance(e, (CostChoice, AdvChoice)):
        if not e.children:
            return BOT
        return type(e)(tuple(_head(c, defs, expand, depth) for c in e.children))
    if isinstance(e, GenChoice):
        if not e.branches:
            return BOT
        return GenChoice(tuple((w, _head(c, defs, expand, depth)) for w, c in e.branches))
    return e


@functools.lru_cache(maxsize=1 << 16)
def head_form(e: Expr, defs: DefTable) -> Expr:
    """Unfold defined calls at active positions and drop finished sequence heads."""
    return _head(e, defs, True, 0)


def tidy(e: Expr, defs: DefTable) -> Expr:
    """Like :func:`head_form` but leaves calls folded, so successors keep their names."""
    return _head(e, defs, False, 0)


# ---------------------------------------------------------------------------
# Local moves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Move:
    agent: AgentId
    kind: str  # act | eps | send | recv
    label: str
    path: Path
    expr: Expr | None
    pars: frozenset  # positions of Par nodes on the path
    choices: tuple[ChoiceStep, ...]


def _local_moves(e: Expr, defs: DefTable, agent: AgentId) -> list[_Move]:
    out: list[_Move] = []

    def walk(e, path, pars, choices):
        if isinstance(e, (Bottom, Epsilon, Var)):
            return
        if isinstance(e, SimpleCall):
            if e.negated:
                positive = head_form(SimpleCall(e.name, e.args), defs)
                if not _local_moves(positive, defs, agent):
                    out.append(_Move(agent, "act", negated_label(e.name), path, e, pars, choices))
            else:
                out.append(_Move(agent, "act", e.name, path, e, pars, choices))
        elif isinstance(e, Cost):
            out.append(_Move(agent, "act", "$", path, e, pars, choices))
        elif isinstance(e, Suppress):
            out.append(_Move(agent, "act", "'", path, e, pars, choices))
        elif isinstance(e, Send):
            out.append(_Move(agent, "send", e.channel, path, e, pars, choices))
        elif isinstance(e, Receive):
            out.append(_Move(agent, "recv", e.channel, path, e, pars, choices))
        elif isinstance(e, Seq):
            walk(e.head, path + (0,), pars, choices)
        elif isinstance(e, Par):
            inner = pars | {path}
            for i, c in enumerate(e.children):
                walk(c, path + (i,), inner, choices)
        elif isinstance(e, (CostChoice, AdvChoice, GenChoice)):
            kind = ("cchoice" if isinstance(e, CostChoice)
                    else "achoice" if isinstance(e, AdvChoice) else "gchoice")
            branches = e.branches if isinstance(e, GenChoice) else [(None, c) for c in e.children]
            for i, (w, c) in enumerate(branches):
                step = choices + (ChoiceStep(path, kind, i, w),)
                if isinstance(c, Epsilon):
                    out.append(_Move(agent, "eps", "eps", path + (i,), None, pars, step))
                else:
                    walk(c, path + (i,), pars, step)
        elif isinstance(e, ProcCall):
            # only reachable past the unfold limit; such a call blocks
            return
        else:
            raise TypeError(f"not an expression: {e!r}")

    walk(e, (), frozenset(), ())
    return out


def _compatible(m1: _Move, m2: _Move) -> bool:
    if m1.agent != m2.agent:
        return True
    p, q = m1.path, m2.path
    d = 0
    while d < len(p) and d < len(q) and p[d] == q[d]:
        d += 1
    if d == len(p) or d == len(q):
        return False
    return p[:d] in m1.pars


def _apply(e: Expr, targets: Sequence[tuple[Path, dict | None]]) -> tuple[Expr, dict | None]:
    """Replace the fired simple expressions at the target paths by ε, all at once.

    Choices on the way collapse to the taken branch. Receive bindings travel
    up to the nearest sequence, whose tail they are substituted into.
    """
    if any(not path for path, _ in targets):
        (_, bindings), = targets
        return EPS, bindings
    if isinstance(e, Seq):
        h, b = _apply(e.head, [(p[1:], bd) for p, bd in targets])
        tail = tuple(substitute(t, b) for t in e.tail) if b else e.tail
        return Seq(h, tail), None
    if isinstance(e, Par):
        kids = list(e.children)
        for i in sorted({p[0] for p, _ in targets}):
            kids[i], _ = _apply(kids[i], [(p[1:], bd) for p, bd in targets if p[0] == i])
        return Par(tuple(kids)), None
    branches = {p[0] for p, _ in targets}
    if isinstance(e, (CostChoice, AdvChoice, GenChoice)) and len(branches) == 1:
        i = branches.pop()
        child = e.children[i]
        return _apply(child, [(p[1:], bd) for p, bd in targets])
    raise ValueError(f"paths {[p for p, _ in targets]} do not address fired expressions "
                     f"in {type(e).__name__}")


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------


def _item(m: _Move) -> Item:
    return Item(m.agent, m.kind, m.label, m.path, m.expr)


def _successor(c: Config, heads: dict, moves: Sequence[_Move], comm=None) -> Config:
    targets: dict = {}
    for m in moves:
        targets.setdefault(m.agent, []).append((m.path, None))
    if comm is not None:
        snd, rcv = comm
        targets.setdefault(snd.agent, []).append((snd.path, None))
        bindings = dict(zip(rcv.expr.vars, snd.expr.children))
        targets.setdefault(rcv.agent, []).append((rcv.path, bindings))
    exprs = dict(heads)
    for agent, ts in targets.items():
        exprs[agent], _ = _apply(exprs[agent], ts)
    touched = set(targets)
    agents = tuple((a, tidy(exprs[a], c.defs) if a in touched else e) for a, e in c.agents)
    return Config(agents, c.defs)


@dataclass(frozen=True)
class Transition:
    action: Action
    target: Config
    moves: tuple[_Move, ...]

    @property
    def choices(self) -> dict:
        """Choice steps resolved by this transition, per agent."""
        out: dict = {}
        for m in self.moves:
            out.setdefault(m.agent, []).extend(m.choices)
        return out


def transitions(c: Config, involving: AgentId | None = None,
                c_max: int = C_MAX, exclusive: bool = False) -> list[Transition]:
    """All enabled transitions, singles first, then communications, then joint steps.

    With ``exclusive`` only steps made of ``involving``'s own labels and its
    rendezvous are produced.
    """
    heads = {a: head_form(e, c.defs) for a, e in c.agents}
    moves: list[_Move] = []
    for a, _ in c.agents:
        moves.extend(_local_moves(heads[a], c.defs, a))
    acts = [m for m in moves if m.kind in ("act", "eps")]
    if exclusive and involving is not None:
        acts = [m for m in acts if m.agent == involving]
    sends = [m for m in moves if m.kind == "send"]
    recvs = [m for m in moves if m.kind == "recv"]

    def wanted(ms):
        return involving is None or any(m.agent == involving for m in ms)

    out: list[Transition] = []
    for m in acts:
        if len(out) >= c_max:
            return out
        if wanted((m,)):
            out.append(Transition(Action((_item(m),)), _successor(c, heads, (m,)), (m,)))
    for s in sends:
        for r in recvs:
            if len(out) >= c_max:
                return out
            if (s.label == r.label and len(s.expr.children) == len(r.expr.vars)
                    and _compatible(s, r) and wanted((s, r))):
                item = Item(s.agent, "comm", s.label, s.path, s.expr, r.agent, r.path)
                out.append(Transition(Action((item,)), _successor(c, heads, (), (s, r)), (s, r)))
    for size in range(2, len(acts) + 1):
        found = False
        for combo in itertools.combinations(acts, size):
            if not all(_compatible(x, y) for x, y in itertools.combinations(combo, 2)):
                continue
            found = True
            if len(out) >= c_max:
                return out
            if wanted(combo):
                out.append(Transition(Action(tuple(_item(m) for m in combo)),
                                      _successor(c, heads, combo), combo))
        if not found:
            break
    return out


def enabled(c: Config, involving: AgentId | None = None,
            c_max: int = C_MAX) -> list[tuple[Action, Config]]:
    """Enabled actions of ``c`` with their successor configurations."""
    return [(t.action, t.target) for t in transitions(c, involving, c_max)]


def step(c: Config, a: Action, c_max: int = C_MAX) -> Config:
    for t in transitions(c, c_max=c_max):
        if t.action == a:
            return t.target
    raise IllegalAction(f"action {a} is not enabled in this configuration")


def run_reactive(c: Config, max_steps: float, seed=0,
                 c_max: int = C_MAX) -> list[tuple[Action, Config]]:
    """Execute uniformly random enabled actions until blocked or ``max_steps`` is reached."""
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    rng = random.Random(seed)
    trace = []
    n = 0
    while n < max_steps:
        options = enabled(c, c_max=c_max)
        if not options:
            break
        action, c = options[rng.randrange(len(options))]
        trace.append((action, c))
        n += 1
    return trace


# ---------------------------------------------------------------------------
# Pricing and serialization of steps
# ---------------------------------------------------------------------------


def item_cost(it: Item, table: CostTable, registry: MetricRegistry | None = None,
              metric: str = STANDARD, defs: DefTable | None = None) -> float:
    if it.kind == "eps":
        return 0.0
    if it.kind == "comm":
        return table.lookup(it.label)
    if isinstance(it.expr, Cost):
        return expr_cost(it.expr, table, registry, metric, defs)
    if isinstance(it.expr, Suppress):
        return 0.0
    if (isinstance(it.expr, SimpleCall) and not it.expr.negated and defs is not None
            and it.label not in table and it.label in defs):
        return expr_cost(it.expr, table, registry, metric, defs)
    return table.lookup(it.label)


def action_cost(a: Action, table: CostTable, registry: MetricRegistry | None = None,
                metric: str = STANDARD, defs: DefTable | None = None) -> float:
    return sum((item_cost(it, table, registry, metric, defs) for it in a.items), 0.0)


def format_cost(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return format(float(v), ".12g")


def trace_lines(trace: Iterable[tuple[Action, float]]) -> list[str]:
    """One ``index<TAB>agents<TAB>labels<TAB>cost`` line per step."""
    lines = []
    for i, (action, cost) in enumerate(trace):
        agents = ",".join(str(it.agent) if it.partner is None else f"{it.agent}>{it.partner}"
                          for it in action.items)
        lines.append(f"{i}\t{agents}\t{','.join(action.labels)}\t{format_cost(cost)}")
    return lines
