"""Command-line front end.

Output is line-oriented ``key: value`` text (or one JSON object with
``--format json``) and never contains wall-clock data, so identical
invocations print identical bytes. Exit status: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import agents as agents_mod
from .cost import CostTable, expr_cost, load_cost_table, default_registry
from .encodings import encode_astar, encode_hillclimb, encode_minimax, encode_tsp
from .errors import BudgetExhausted, CostCalcError
from .komega import KOmegaConfig, RunResult, run, self_tune
from .lts import Config, action_cost, format_cost, run_reactive, trace_lines
from .parser import parse, print_program
from .problems import parse_game_tree, parse_graph, parse_tsp

INF = math.inf

DIAMOND = """\
start s
goal g
s a 1
s b 2
a g 10
b g 3
"""
GAME = "((1 4) (2 3))\n"
TRIANGLE = "0 1 3\n1 0 2\n3 2 0\n"
PIPELINE = """\
agent 0 k=2 n=1
agent 1 k=2 n=1
(seq (call produce) (send item) (call tidy))
(seq (recv item) (call consume))
"""
PIPELINE_COSTS = CostTable({"produce": 2.0, "item": 1.0, "tidy": 0.5, "consume": 3.0})

DEMOS = ("astar", "hillclimb", "minimax", "tsp", "game", "pipeline")


class UsageError(Exception):
    pass


def _count(text: str) -> float:
    if text.lower() in ("inf", "∞"):
        return INF
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer or 'inf', got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer or 'inf', got {text!r}")
    return v


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _costs(args) -> CostTable:
    return load_cost_table(_read(args.costs)) if args.costs else CostTable()


def _emit(args, pairs: list[tuple[str, object]], out) -> None:
    if args.format == "json":
        out.write(json.dumps({k: v for k, v in pairs}, sort_keys=False) + "\n")
    else:
        for k, v in pairs:
            out.write(f"{k}: {v}\n")


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return "(" + ", ".join(format_cost(x) for x in v) + ")"
    return format_cost(v)


def _result_pairs(r: RunResult) -> list[tuple[str, object]]:
    pairs = [
        ("goal_reached", "true" if r.goal_reached else "false"),
        ("iterations", r.iterations),
        ("solution_cost", _fmt(r.best_solution_cost)),
        ("search_cost", _fmt(r.best_search_cost)),
        ("aggregated_cost", _fmt(r.aggregated)),
        ("elapsed_steps", r.elapsed_steps),
        ("solutions", r.solutions),
        ("path", " ".join(",".join(a.labels) for a, _ in r.trace)),
    ]
    if r.root_values:
        pairs.append(("root_value", _fmt(r.root_values[0])))
    if r.best_config is not None:
        c = r.best_config
        pairs.append(("params", f"k={_fmt(c.k)} b={_fmt(c.b)} n={_fmt(c.n)}"))
    return pairs


def _user_overrides(args) -> dict:
    o = {}
    for name in ("k", "b", "n"):
        v = getattr(args, name, None)
        if v is not None:
            o[name] = v
    if getattr(args, "budget", None) is not None:
        o["iteration_budget"] = args.budget
    for flag in ("strongcong", "update", "reinf"):
        if getattr(args, flag, False):
            o[flag] = True
    if getattr(args, "metric", None):
        o["metric"] = args.metric
    o["seed"] = args.seed
    return o


def _problem(kind: str, text: str):
    if kind == "astar":
        return encode_astar(parse_graph(text))
    if kind == "hillclimb":
        return encode_hillclimb(parse_graph(text))
    if kind == "minimax":
        return encode_minimax(parse_game_tree(text))
    if kind == "tsp":
        return encode_tsp(parse_tsp(text))
    raise UsageError(f"unknown demo {kind!r}; choose from astar, hillclimb, minimax, tsp")


def _write_trace(args, trace) -> None:
    if args.trace:
        lines = trace_lines(trace)
        Path(args.trace).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _run_search(program, overrides, args, out) -> int:
    try:
        r = run(program, overrides)
    except BudgetExhausted as exc:
        r = exc.result
        _emit(args, _result_pairs(r) + [("error", str(exc))], out)
        _write_trace(args, r.trace)
        return 1
    _emit(args, _result_pairs(r), out)
    _write_trace(args, r.trace)
    return 0


def _run_universe(u, args, out) -> int:
    rounds = args.budget if args.budget is not None else 100
    u = agents_mod.run_universe(u, rounds)
    if args.format == "json":
        out.write(json.dumps({"lines": agents_mod.universe_lines(u)}) + "\n")
    else:
        out.write("\n".join(agents_mod.universe_lines(u)) + "\n")
    trace = [step for s in u.agents for step in s.result().trace]
    _write_trace(args, trace)
    return 0


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_parse(args, out) -> int:
    programs, defs = parse(_read(args.file))
    out.write(print_program(programs, defs, pretty=args.pretty))
    return 0


def cmd_cost(args, out) -> int:
    programs, defs = parse(_read(args.file))
    table = _costs(args)
    registry = default_registry()
    pairs = [("cost", format_cost(expr_cost(e, table, registry, args.metric or "standard", defs)))
             for e in programs]
    _emit(args, pairs, out)
    return 0


def cmd_run(args, out) -> int:
    programs, defs = parse(_read(args.file))
    table = _costs(args)
    config = Config(tuple(enumerate(programs)), defs)
    steps = args.budget if args.budget is not None else 1000
    trace = run_reactive(config, steps, seed=args.seed)
    priced = [(a, action_cost(a, table, defs=defs)) for a, _ in trace]
    final = trace[-1][1] if trace else config
    pairs = [
        ("steps", len(trace)),
        ("terminated", "true" if final.terminated() else "false"),
        ("solution_cost", format_cost(sum(c for _, c in priced))),
        ("path", " ".join(",".join(a.labels) for a, _ in priced)),
    ]
    _emit(args, pairs, out)
    _write_trace(args, priced)
    return 0


def cmd_search(args, out) -> int:
    if args.agents:
        u = agents_mod.load_scenario(_read(args.agents), _costs(args) if args.costs else None, args.seed)
        return _run_universe(u, args, out)
    if args.file is None:
        raise UsageError("search needs a program or problem file (or --agents)")
    text = _read(args.file)
    if args.demo:
        program, overrides = _problem(args.demo, text)
    else:
        programs, defs = parse(text)
        if not programs:
            raise UsageError("program file contains no top-level expression")
        program, overrides = programs[0], {"defs": defs, "costs": _costs(args)}
    overrides.update(_user_overrides(args))
    return _run_search(program, overrides, args, out)


def cmd_demo(args, out) -> int:
    name = args.name
    if name in ("astar", "hillclimb"):
        program, overrides = _problem(name, DIAMOND)
    elif name == "minimax":
        program, overrides = _problem(name, GAME)
    elif name == "tsp":
        program, overrides = _problem(name, TRIANGLE)
    elif name == "game":
        u = agents_mod.competitive(parse_game_tree(GAME), seed=args.seed)
        return _run_universe(u, args, out)
    elif name == "pipeline":
        u = agents_mod.load_scenario(PIPELINE, PIPELINE_COSTS, args.seed)
        return _run_universe(u, args, out)
    else:
        raise UsageError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    overrides.update(_user_overrides(args))
    return _run_search(program, overrides, args, out)


def _measure(program, overrides, params) -> float:
    try:
        r = run(program, dict(overrides, **params))
    except BudgetExhausted:
        return INF
    v = r.aggregated
    return v[0] + v[1] if isinstance(v, tuple) else v


def cmd_tune(args, out) -> int:
    text = _read(args.file) if args.file else DIAMOND
    program, overrides = _problem(args.demo or "astar", text)
    overrides.update(_user_overrides(args))
    overrides.setdefault("iteration_budget", 10_000)
    initial = KOmegaConfig(k=overrides.get("k", 1), b=overrides.get("b", INF),
                           n=overrides.get("n", 0))
    tuned_fields = ("k", "b", "n", "search_cost_threshold")
    base = {k: v for k, v in overrides.items() if k not in tuned_fields}

    def benchmark(params):
        return run(program, dict(base, **params))

    tuned = self_tune(benchmark, initial, rounds=args.rounds, seed=args.seed)

    def params(c):
        return {k: getattr(c, k) for k in tuned_fields}

    def show(c):
        thr = "none" if c.search_cost_threshold is None else format_cost(c.search_cost_threshold)
        return f"k={_fmt(c.k)} b={_fmt(c.b)} n={_fmt(c.n)} threshold={thr}"

    pairs = [
        ("initial", show(initial)),
        ("initial_cost", format_cost(_measure(program, base, params(initial)))),
        ("tuned", show(tuned)),
        ("tuned_cost", format_cost(_measure(program, base, params(tuned)))),
    ]
    _emit(args, pairs, out)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="costcalc", description="Cost-calculus interpreter and kΩ search")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, search=False):
        sp.add_argument("--costs", metavar="FILE", help="cost table file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--budget", type=int, help="iteration / step / round budget")
        sp.add_argument("--trace", metavar="FILE", help="write executed steps to FILE")
        sp.add_argument("--metric", metavar="NAME", help="metric set (standard, makespan)")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        if search:
            sp.add_argument("--k", type=_count)
            sp.add_argument("--b", type=_count)
            sp.add_argument("--n", type=_count)
            sp.add_argument("--strongcong", action="store_true")
            sp.add_argument("--update", action="store_true")
            sp.add_argument("--reinf", action="store_true")

    sp = sub.add_parser("parse", help="validate and pretty-print a program file")
    sp.add_argument("file")
    sp.add_argument("--pretty", action="store_true")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("cost", help="cost of every top-level program")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("run", help="reactive execution of the programs as agents")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("search", help="kΩ search over a program or demo problem")
    sp.add_argument("file", nargs="?")
    sp.add_argument("--demo", choices=("astar", "hillclimb", "minimax", "tsp"),
                    help="read FILE as a problem of this kind")
    sp.add_argument("--agents", metavar="FILE", help="multi-agent scenario file")
    common(sp, search=True)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("demo", help="run a bundled demo")
    sp.add_argument("name", choices=DEMOS)
    common(sp, search=True)
    sp.set_defaults(func=cmd_demo)

    sp = sub.add_parser("tune", help="self-tune k, b, n on a benchmark problem")
    sp.add_argument("file", nargs="?", help="problem file (default: bundled diamond graph)")
    sp.add_argument("--demo", choices=("astar", "hillclimb", "minimax", "tsp"))
    sp.add_argument("--rounds", type=int, default=3)
    common(sp, search=True)
    sp.set_defaults(func=cmd_tune)
    return p


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"costcalc: usage error: {exc}\n")
        return 2
    except (CostCalcError, ValueError, KeyError, OSError) as exc:
        where = getattr(args, "file", None) or getattr(args, "agents", None) or ""
        prefix = f"{where}:" if where else ""
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        err.write(f"costcalc: {prefix}{msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
