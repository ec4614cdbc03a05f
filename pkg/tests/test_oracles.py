import pytest

from costcalc.oracles import (
    TooLarge, Unreachable, brute_minimax, brute_tsp, dijkstra, enumerate_schedules,
)
from costcalc.problems import GameTreeProblem, GraphProblem, TspProblem, parse_graph


def test_dijkstra_examples():
    assert dijkstra(parse_graph("start s\ngoal g\ns g 5\n")).value == 5
    diamond = parse_graph("start s\ngoal g\ns a 1\ns b 2\na g 10\nb g 3\n")
    r = dijkstra(diamond)
    assert r.value == 5 and r.witness == ("s", "b", "g")
    with pytest.raises(Unreachable):
        dijkstra(GraphProblem(("s", "g"), (), "s", frozenset({"g"})))


def test_minimax_examples():
    assert brute_minimax(GameTreeProblem((3.0, 5.0))).value == 3
    assert brute_minimax(GameTreeProblem(((1.0, 4.0), (2.0, 3.0)))).value == 3
    assert brute_minimax(GameTreeProblem(((7.0, 7.0), (7.0, 7.0)))).value == 7
    assert brute_minimax(GameTreeProblem((3.0, 5.0), root_max=True)).value == 5


def test_tsp_examples():
    tri = TspProblem(((0, 1, 3), (1, 0, 2), (3, 2, 0)))
    assert brute_tsp(tri).value == 6
    ones = TspProblem(tuple(tuple(0 if i == j else 1 for j in range(4)) for i in range(4)))
    assert brute_tsp(ones).value == 4
    big = TspProblem(tuple(tuple(0 if i == j else 1 for j in range(11)) for i in range(11)))
    with pytest.raises(TooLarge):
        brute_tsp(big)


def test_schedule_enumeration_counts():
    # two one-step agents: {a}, {b}, {a,b} in any order -> a;b, b;a, {a,b}
    out = enumerate_schedules([[["a"]], [["b"]]], 4)
    assert len(out) == 3
    # a choice commits on the first step
    out = enumerate_schedules([[["a", "b"], ["c"]]], 4)
    assert out == {(frozenset({(0, "a")}), frozenset({(0, "b")})), (frozenset({(0, "c")}),)}


def test_oracles_do_not_import_the_engine():
    import ast
    import inspect

    import costcalc.oracles as mod
    tree = ast.parse(inspect.getsource(mod))
    imported = {n.module for n in ast.walk(tree) if isinstance(n, ast.ImportFrom)}
    assert imported <= {"__future__", "collections.abc", "dataclasses", "problems"}
