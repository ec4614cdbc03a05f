"""Cost-calculus process algebra with kΩ-optimization meta-search."""

from .cost import (
    Aggregator, CostTable, MetricRegistry, aggregate, default_registry, expr_cost,
    register_metric, rl_update,
)
from .errors import (
    AlphabetClash, ArityMismatch, BudgetExhausted, CostCalcError, IllegalAction,
    InvalidOverride, InvalidWeights, ParseError, ReservedName, UndefinedName, UnknownLabel,
)
from .expr import DefTable, Definition, normalize, structural_equal, substitute
from .komega import Goal, KOmegaConfig, RunResult, init, run, self_tune
from .lts import Action, Config, enabled, run_reactive, step, transitions
from .parser import parse, parse_expr, print_expr, print_program

__all__ = [
    "Action", "Aggregator", "AlphabetClash", "ArityMismatch", "BudgetExhausted",
    "Config", "CostCalcError", "CostTable", "DefTable", "Definition", "Goal",
    "IllegalAction", "InvalidOverride", "InvalidWeights", "KOmegaConfig",
    "MetricRegistry", "ParseError", "ReservedName", "RunResult", "UndefinedName",
    "UnknownLabel", "aggregate", "default_registry", "enabled", "expr_cost", "init",
    "normalize", "parse", "parse_expr", "print_expr", "print_program", "register_metric",
    "rl_update", "run", "run_reactive", "self_tune", "step", "structural_equal",
    "substitute", "transitions",
]
