import random

import pytest
from hypothesis import given, settings

from costcalc.cost import CostTable
from costcalc.errors import IllegalAction
from costcalc.expr import (
    EPS, Receive, Send, Seq, SimpleCall, Var, uniform,
)
from costcalc.lts import (
    Config, action_cost, enabled, format_cost, run_reactive, step, trace_lines,
    transitions,
)
from costcalc.oracles import enumerate_schedules
from costcalc.parser import parse, parse_expr
from strategies import closed_programs


def labels(c, exclusive=False, **kw):
    return sorted(tuple(sorted(t.action.labels)) for t in transitions(c, exclusive=exclusive, **kw))


def test_sequence_fires_head_only():
    c = Config.of(parse_expr("(seq (call a) (call b))"))
    assert labels(c) == [("a",)]
    (a, nxt), = enabled(c)
    assert labels(nxt) == [("b",)]


def test_parallel_offers_singles_and_joint_step():
    c = Config.of(parse_expr("(par (call a) (call b))"))
    assert labels(c) == [("a",), ("a", "b"), ("b",)]


def test_choice_branches_are_alternatives():
    c = Config.of(parse_expr("(cchoice (call a) (seq (call b) (call c)))"))
    ts = transitions(c)
    assert sorted(t.action.labels for t in ts) == [("a",), ("b",)]
    after_b = next(t.target for t in ts if t.action.labels == ("b",))
    assert labels(after_b) == [("c",)]
    assert ts[0].choices[0][0].kind == "cchoice"


def test_epsilon_branch_is_silent_move():
    c = Config.of(parse_expr("(cchoice eps (call a))"))
    assert ("eps",) in labels(c)


def test_bottom_and_epsilon_have_no_transitions():
    assert enabled(Config.of(parse_expr("bot"))) == []
    assert enabled(Config.of(parse_expr("eps"))) == []
    assert Config.of(EPS).terminated()


def test_rendezvous_across_agents():
    c = Config.of(parse_expr("(seq (send ch (call v)) (call a))"),
                  parse_expr("(seq (recv ch x) x)"))
    ts = transitions(c)
    assert len(ts) == 1 and ts[0].action.items[0].kind == "comm"
    after = ts[0].target
    # the received value became the receiver's continuation
    assert labels(after, involving=1, exclusive=True) == [("v",)]


def test_send_alone_blocks():
    assert enabled(Config.of(Send("ch"))) == []


def test_arity_must_match_for_rendezvous():
    c = Config.of(Send("ch", (SimpleCall("v"),)), Receive("ch", ()))
    assert enabled(c) == []


def test_negated_call_is_a_guard():
    progs, defs = parse("(def (ready) bot)\n(def (go) (call a))\n(ncall ready)\n(ncall go)")
    blocked = Config.of(progs[1], defs=defs)
    free = Config.of(progs[0], defs=defs)
    assert enabled(blocked) == []
    assert labels(free) == [("~ready",)]


def test_recursive_definition_unfolds_lazily():
    progs, defs = parse("(def (loop) (seq (call a) (call loop)))\n(call loop)")
    c = Config.of(progs[0], defs=defs)
    for _ in range(5):
        (act, c), = enabled(c)
        assert act.labels == ("a",)


def test_step_rejects_disabled_actions():
    c = Config.of(parse_expr("(seq (call a) (call b))"))
    (a, nxt), = enabled(c)
    with pytest.raises(IllegalAction):
        step(nxt, a)
    assert step(c, a) == nxt


def test_open_configurations_rejected():
    with pytest.raises(ValueError):
        Config.of(Var("x"))


def test_c_max_caps_enumeration():
    c = Config.of(parse_expr("(par (call a) (call b) (call c) (call d))"))
    assert len(transitions(c)) == 15
    assert len(transitions(c, c_max=6)) == 6


def test_reactive_runs_are_reproducible():
    c = Config.of(parse_expr("(par (call a) (cchoice (call b) (call c)) (call d))"))
    t1 = [a.labels for a, _ in run_reactive(c, 10, seed=3)]
    t2 = [a.labels for a, _ in run_reactive(c, 10, seed=3)]
    assert t1 == t2


@given(closed_programs())
@settings(max_examples=150, deadline=None)
def test_every_successor_is_reachable_by_its_action(e):
    c = Config.of(e)
    for action, target in enabled(c):
        assert step(c, action) == target


def test_costs_and_trace_lines():
    t = CostTable({"a": 2.0, "ch": 1.5})
    c = Config.of(parse_expr("(seq (send ch) (call a))"), parse_expr("(recv ch)"))
    trace = [(a, action_cost(a, t)) for a, _ in run_reactive(c, 5)]
    assert trace_lines(trace) == ["0\t0>1\tch\t1.5", "1\t0\ta\t2"]
    assert format_cost(float("inf")) == "inf"


# ---- schedule soundness against the independent enumerator -------------------

def _toy_universe(rng):
    """Three agents, each a chain or a uniform choice between chains, <= 4 steps in total."""
    spec, programs = [], []
    budget = 4
    for i in range(3):
        alts = []
        for _ in range(rng.choice((1, 1, 2))):
            length = rng.randint(1, 2)
            alts.append([f"l{i}{len(alts)}{j}" for j in range(length)])
        spec.append(alts)
        chains = [Seq(SimpleCall(ls[0]), tuple(SimpleCall(x) for x in ls[1:])) for ls in alts]
        programs.append(chains[0] if len(chains) == 1 else uniform(*chains))
    return spec, programs, budget


def _as_schedule(trace):
    return tuple(frozenset((it.agent, it.label) for it in a.items) for a, _ in trace)


def test_reactive_traces_are_valid_schedules():
    rng = random.Random(12)
    for _ in range(40):
        spec, programs, budget = _toy_universe(rng)
        allowed = enumerate_schedules(spec, budget)
        c = Config.of(*programs)
        for seed in range(10):
            assert _as_schedule(run_reactive(c, budget, seed=seed)) in allowed
