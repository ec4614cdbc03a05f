import io

import pytest

from costcalc.cli import main
from costcalc.oracles import dijkstra
from costcalc.problems import parse_graph

DIAMOND = "start s\ngoal g\ns a 1\ns b 2\na g 10\nb g 3\n"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(map(str, argv)), out, err)
    return code, out.getvalue(), err.getvalue()


def fields(text):
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)


@pytest.fixture
def files(tmp_path):
    (tmp_path / "ok.cost").write_text("(def (f) (seq (call a) (call b)))\n(call f)\n")
    (tmp_path / "prog.cost").write_text("(seq (call a) (call b))\n")
    (tmp_path / "t.tbl").write_text("a 2\nb 3\n")
    (tmp_path / "diamond.graph").write_text(DIAMOND)
    (tmp_path / "bad.cost").write_text("(seq (call a)\n  (frob))\n")
    return tmp_path


def test_parse_prints_canonical_program(files):
    code, out, _ = call("parse", files / "ok.cost")
    assert code == 0
    assert out == "(def (f) (seq (call a) (call b)))\n(call f)\n"
    code, out, _ = call("parse", files / "ok.cost", "--pretty")
    assert code == 0 and "∘" in out


def test_cost_sums_a_sequence(files):
    code, out, _ = call("cost", files / "prog.cost", "--costs", files / "t.tbl")
    assert code == 0 and out == "cost: 5\n"


def test_search_demo_astar_matches_dijkstra(files):
    code, out, _ = call("search", files / "diamond.graph", "--demo", "astar", "--seed", 7)
    assert code == 0
    assert float(fields(out)["solution_cost"]) == dijkstra(parse_graph(DIAMOND)).value


def test_search_accepts_infinite_parameters(files):
    code, out, _ = call("search", files / "prog.cost", "--costs", files / "t.tbl",
                        "--k", "inf", "--n", "0")
    assert code == 0 and fields(out)["solution_cost"] == "5"
    assert fields(out)["params"] == "k=inf b=inf n=0"


def test_domain_errors_exit_one_with_location(files):
    code, _, err = call("parse", files / "bad.cost")
    assert code == 1 and "bad.cost:2:4:" in err
    code, _, err = call("cost", files / "missing.cost")
    assert code == 1


def test_usage_errors_exit_two(files):
    assert call("search", "--k", "many")[0] == 2
    assert call("frobnicate")[0] == 2
    assert call("search")[0] == 2


def test_run_and_trace(files):
    trace = files / "trace.txt"
    code, out, _ = call("run", files / "prog.cost", "--costs", files / "t.tbl", "--trace", trace)
    assert code == 0 and fields(out)["solution_cost"] == "5"
    assert trace.read_text() == "0\t0\ta\t2\n1\t0\tb\t3\n"


@pytest.mark.parametrize("name", ["astar", "hillclimb", "minimax", "tsp", "game", "pipeline"])
def test_demos_run(name):
    code, out, _ = call("demo", name)
    assert code == 0 and out


def test_json_output(files):
    import json
    code, out, _ = call("search", files / "diamond.graph", "--demo", "astar", "--format", "json")
    assert json.loads(out)["solution_cost"] == "5"


def test_tune_reports_both_configs():
    code, out, _ = call("tune", "--rounds", 1)
    f = fields(out)
    assert code == 0 and float(f["tuned_cost"]) <= float(f["initial_cost"])


def test_budget_exhaustion_is_a_domain_error(files):
    (files / "loop.cost").write_text("(def (l) (seq (call a) (call l)))\n(call l)\n")
    code, out, _ = call("search", files / "loop.cost", "--k", 1, "--n", 1, "--budget", 3)
    assert code == 1 and "error: no goal" in out


def test_agents_scenario(files):
    (files / "s.cost").write_text("agent 0 n=1\nagent 1 n=1\n(send ch)\n(seq (recv ch) (call a))\n")
    code, out, _ = call("search", "--agents", files / "s.cost", "--costs", files / "t.tbl")
    assert code == 0 and "agent 1: goal_reached=true" in out


def test_identical_invocations_are_byte_identical(files):
    args = ("search", files / "diamond.graph", "--demo", "astar", "--seed", 3)
    t1, t2 = files / "t1", files / "t2"
    r1 = call(*args, "--trace", t1)
    r2 = call(*args, "--trace", t2)
    assert r1 == r2 and t1.read_bytes() == t2.read_bytes()
