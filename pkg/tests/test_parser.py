import random

import pytest
from hypothesis import given, settings

from costcalc.errors import ParseError
from costcalc.expr import (
    BOT, EPS, CostWeight, GenChoice, ProcCall, Seq, SimpleCall, WeightMode,
    structural_equal,
)
from costcalc.parser import parse, parse_expr, print_expr, print_program, read_sexprs
from strategies import PROC_CONTEXT, exprs, gen_expr


@given(exprs())
@settings(max_examples=300, deadline=None)
def test_print_parse_round_trip(e):
    assert structural_equal(parse_expr(print_expr(e), PROC_CONTEXT), e)


def test_round_trip_is_exact_for_a_fixed_corpus():
    rng = random.Random(7)
    for _ in range(200):
        e = gen_expr(rng)
        assert parse_expr(print_expr(e), PROC_CONTEXT) == e


def test_simple_forms():
    assert parse_expr("bot") == BOT
    assert parse_expr("eps") == EPS
    assert parse_expr("(seq)") == EPS
    assert parse_expr("(seq (call a) (call b))") == Seq(SimpleCall("a"), (SimpleCall("b"),))


def test_gchoice_forms():
    g = parse_expr("(gchoice (0.3 (call a)) (0.7 (call b)))")
    assert [w.w for w, _ in g.branches] == [0.3, 0.7]
    f = parse_expr("(gchoice fuzzy (call a) (call b))")
    assert f == GenChoice(((CostWeight(WeightMode.FUZZY, 0.5), SimpleCall("a")),
                           (CostWeight(WeightMode.FUZZY, 0.5), SimpleCall("b"))))
    with pytest.raises(ParseError):
        parse_expr("(gchoice (0.3 (call a)) (call b))")
    with pytest.raises(ParseError):
        parse_expr("(gchoice (0.3 (call a) (call b)))")


def test_call_kind_follows_definitions():
    progs, defs = parse("(def (loop) (seq (call a) (call loop)))\n(call loop)\n(call a)")
    assert isinstance(progs[0], ProcCall)
    assert isinstance(progs[1], SimpleCall)
    assert not defs.lookup("loop").atomic


def test_definition_calling_a_process_is_a_process():
    progs, defs = parse("(def (p) (call q))\n(def (q) (seq (call a) (call b)))\n(call p)")
    assert isinstance(progs[0], ProcCall)


def test_atomic_definition_stays_simple():
    progs, defs = parse("(def (tick) (cost))\n(call tick)")
    assert isinstance(progs[0], SimpleCall)
    assert defs.lookup("tick").atomic


def test_errors_carry_spans():
    with pytest.raises(ParseError) as info:
        parse("(seq (call a)\n  (frob b))")
    assert info.value.span.line == 2
    assert str(info.value).startswith("2:4:")
    with pytest.raises(ParseError):
        parse("(seq (call a)")
    with pytest.raises(ParseError):
        parse("(call a))")


def test_duplicate_definition_rejected():
    with pytest.raises(ParseError):
        parse("(def (f) (call a))\n(def (f) (call b))")


def test_reserved_words_are_not_names():
    with pytest.raises(ParseError):
        parse_expr("(call seq)")


def test_comments_ignored():
    assert parse_expr("# header\n(call a) # trailing") == SimpleCall("a")
    assert len(read_sexprs("(a) # (b)\n(c)")) == 2


def test_program_print_reparses():
    text = "(def (f x) (seq x (call f x)))\n(call f (call a))\n"
    progs, defs = parse(text)
    again, defs2 = parse(print_program(progs, defs))
    assert again == progs
    assert defs2.lookup("f") == defs.lookup("f")


def test_pretty_uses_glyphs():
    assert print_expr(parse_expr("(cchoice (call a) bot)"), pretty=True) == "(⊕ (a) ⊥)"
