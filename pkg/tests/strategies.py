"""Random expression generators shared by the property tests."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from costcalc.expr import (
    BOT, EPS, AdvChoice, Cost, CostChoice, CostWeight, DefTable, Definition,
    GenChoice, Par, ProcCall, Receive, Send, Seq, SimpleCall, Suppress, Var,
    WeightMode,
)

NAMES = ("a", "b", "c", "d")
CHANNELS = ("ch", "io")
VARS = ("x", "y")
PROCS = ("f", "g")

#: Context that makes ``f`` and ``g`` process calls when re-parsing.
PROC_CONTEXT = DefTable({
    "f": Definition("f", (), Seq(SimpleCall("a"), (ProcCall("f"),))),
    "g": Definition("g", ("x",), Par((Var("x"), SimpleCall("b")))),
})

_WEIGHTS = (0.0, 0.25, 0.5, 1.0, 0.1, 1 / 3)


def gen_expr(rng: random.Random, depth: int = 8) -> object:
    """Any expression (open ones included) of depth at most ``depth``."""
    if depth <= 1 or rng.random() < 0.25:
        return _leaf(rng)
    sub = lambda: gen_expr(rng, depth - 1)  # noqa: E731
    kids = lambda lo=0, hi=3: tuple(sub() for _ in range(rng.randint(lo, hi)))  # noqa: E731
    kind = rng.randrange(11)
    if kind == 0:
        return Seq(sub(), kids())
    if kind == 1:
        return Par(kids())
    if kind == 2:
        return CostChoice(kids())
    if kind == 3:
        return AdvChoice(kids())
    if kind == 4:
        mode = rng.choice(list(WeightMode))
        return GenChoice(tuple((CostWeight(mode, rng.choice(_WEIGHTS)), sub())
                               for _ in range(rng.randint(0, 3))))
    if kind == 5:
        return Cost(kids())
    if kind == 6:
        return Suppress(kids())
    if kind == 7:
        return Send(rng.choice(CHANNELS), kids(0, 2))
    if kind == 8:
        return SimpleCall(rng.choice(NAMES), kids(0, 2), negated=rng.random() < 0.3)
    if kind == 9:
        return ProcCall(rng.choice(PROCS), kids(0, 1), force_once=rng.random() < 0.3)
    return Seq(Receive(rng.choice(CHANNELS), tuple(rng.sample(VARS, rng.randint(0, 2)))), kids(1, 2))


def _leaf(rng):
    k = rng.randrange(7)
    if k == 0:
        return BOT
    if k == 1:
        return EPS
    if k == 2:
        return Var(rng.choice(VARS))
    if k == 3:
        return Send(rng.choice(CHANNELS))
    if k == 4:
        return Cost()
    return SimpleCall(rng.choice(NAMES))


def depth(e) -> int:
    from costcalc.expr import children_of
    kids = children_of(e)
    return 1 + max((depth(c) for c in kids), default=0)


def exprs(max_depth: int = 8):
    return st.builds(lambda r: gen_expr(r, max_depth), st.randoms(use_true_random=False))


def closed_programs(names=NAMES, max_depth: int = 3):
    """Closed choice/sequence/parallel programs over simple calls."""

    def build(r):
        from costcalc.expr import random_expr
        return random_expr(r, names, depth=max_depth)

    return st.builds(build, st.randoms(use_true_random=False))
