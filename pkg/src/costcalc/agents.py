"""Multi-agent universes: several kΩ agents sharing one configuration.

Each agent's simple labels (and the definitions it uses) are suffixed with
``@<id>`` so alphabets stay disjoint; channel names are global and form the
communication namespace. A round lets every agent run one loop iteration in
id order.
"""

from __future__ import annotations

import math
from collections import ChainMap
from collections.abc import Mapping
from dataclasses import dataclass, field, replace

from .cost import CostTable
from .errors import AlphabetClash
from .expr import (
    AdvChoice, CostChoice, DefTable, Definition, Expr, ProcCall, Receive, Send,
    Seq, SimpleCall, children_of, names_in, with_children,
)
from .komega import KOmegaConfig, KOmegaSearch, RunResult, init
from .lts import Config
from .problems import GameTreeProblem

INF = math.inf
MAX_AGENTS = 64


def suffix_expr(e: Expr, suffix: str) -> Expr:
    """Tag every simple label and called name with ``suffix``; channels stay shared."""
    if isinstance(e, SimpleCall):
        return replace(e, name=e.name + suffix,
                       args=tuple(suffix_expr(a, suffix) for a in e.args))
    if isinstance(e, ProcCall):
        return replace(e, name=e.name + suffix,
                       args=tuple(suffix_expr(a, suffix) for a in e.args))
    kids = children_of(e)
    if not kids:
        return e
    return with_children(e, tuple(suffix_expr(c, suffix) for c in kids))


class SuffixedDefinitions(Mapping):
    """Shared definitions seen through agent suffixes.

    ``f@3`` resolves to the definition of ``f`` with every label in its body
    tagged ``@3``. Entries are produced on demand, so lazy families work.
    """

    def __init__(self, base: Mapping[str, Definition]):
        self.base = base
        self._cache: dict[str, Definition] = {}

    def __getitem__(self, key):
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if not isinstance(key, str) or "@" not in key:
            return self.base[key]
        name, _, agent = key.rpartition("@")
        d = self.base[name]
        out = Definition(key, d.params, suffix_expr(d.body, "@" + agent), d.atomic)
        self._cache[key] = out
        return out

    def __contains__(self, key):
        if not isinstance(key, str):
            return False
        return key.rpartition("@")[0] in self.base if "@" in key else key in self.base

    def __iter__(self):
        return iter(self.base)

    def __len__(self):
        return len(self.base)


@dataclass(frozen=True)
class AgentSlot:
    id: int
    program: Expr
    search: KOmegaSearch

    @property
    def cfg(self) -> KOmegaConfig:
        return self.search.cfg

    def result(self) -> RunResult:
        return self.search.result()


@dataclass(frozen=True)
class Universe:
    """Agents, the shared configuration and the definitions they draw on."""

    agents: tuple[AgentSlot, ...] = ()
    config: Config = field(default_factory=lambda: Config((), DefTable()))
    base_defs: tuple[Mapping, ...] = ()
    seed: int = 0
    auto_suffix: bool = True
    max_agents: int = MAX_AGENTS
    rounds: int = 0

    @property
    def channels(self) -> frozenset[str]:
        from .expr import channels_in
        out = set()
        for _, e in self.config.agents:
            out |= channels_in(e)
        return frozenset(out)

    def slot(self, agent_id: int) -> AgentSlot:
        for s in self.agents:
            if s.id == agent_id:
                return s
        raise KeyError(agent_id)


def _defs_view(base_defs, alphabets) -> DefTable:
    merged = ChainMap(*reversed(base_defs)) if base_defs else {}
    return DefTable(SuffixedDefinitions(merged), alphabets)


def spawn(u: Universe, program: Expr, overrides: Mapping | None = None) -> Universe:
    """Add an agent running ``program`` with its own kΩ parameters.

    ``overrides`` may carry ``defs`` (a DefTable or mapping of definitions
    used by the program) and any kΩ parameter. The agent's alphabet is the
    set of its suffixed labels unless ``alphabet`` is given. Without
    auto-suffixing, overlapping alphabets raise :class:`AlphabetClash`.
    """
    if len(u.agents) >= u.max_agents:
        raise ValueError(f"universe capped at {u.max_agents} agents")
    overrides = dict(overrides or {})
    agent_id = len(u.agents)
    extra = overrides.pop("defs", None)
    base_defs = u.base_defs
    if extra is not None:
        base_defs = base_defs + (extra.definitions if isinstance(extra, DefTable) else extra,)
    if u.auto_suffix:
        program = suffix_expr(program, f"@{agent_id}")
    own = frozenset(n for n in names_in(program))
    alphabets = dict(u.config.defs.alphabets)
    for other, names in alphabets.items():
        clash = own & names
        if clash:
            raise AlphabetClash(f"agent {agent_id} shares names {sorted(clash)} with agent {other}")
    alphabets[agent_id] = own
    defs = _defs_view(base_defs, alphabets)
    overrides.setdefault("alphabet", own)
    overrides.setdefault("seed", u.seed + agent_id)
    overrides.update(program=program, defs=defs, agent=agent_id)
    cfg, solo = init(overrides)
    config = Config(u.config.agents + ((agent_id, solo.expr(agent_id)),), defs)
    # re-home every existing agent onto the widened definition table
    slots = tuple(replace(s, search=_rehome(s.search, defs)) for s in u.agents)
    slot = AgentSlot(agent_id, solo.expr(agent_id), KOmegaSearch(cfg, config, wait_when_blocked=True))
    return replace(u, agents=slots + (slot,), config=config, base_defs=base_defs)


def _rehome(search: KOmegaSearch, defs: DefTable) -> KOmegaSearch:
    new = search.clone()
    new.tree = None  # trees hold configurations over the old table
    return new


def round(u: Universe) -> Universe:  # noqa: A001 - mirrors the loop vocabulary
    """One macro-step: each unfinished agent runs one loop iteration, in id order."""
    config = u.config
    slots = []
    for s in u.agents:
        search = s.search.clone()
        if not search.finished:
            config = search.iterate(config)
        slots.append(replace(s, search=search))
    return replace(u, agents=tuple(slots), config=config, rounds=u.rounds + 1)


def run_universe(u: Universe, rounds: int) -> Universe:
    """Play ``rounds`` rounds or until every agent is finished."""
    for _ in range(rounds):
        if all(s.search.finished for s in u.agents):
            break
        u = round(u)
    return u


def universe_lines(u: Universe) -> list[str]:
    from .lts import format_cost
    out = [f"rounds: {u.rounds}", f"agents: {len(u.agents)}"]
    for s in u.agents:
        r = s.result()
        out.append(
            f"agent {s.id}: goal_reached={'true' if r.goal_reached else 'false'} "
            f"iterations={r.iterations} solution_cost={format_cost(r.best_solution_cost)} "
            f"search_cost={format_cost(r.best_search_cost)}")
    return out


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


def game_programs(t: GameTreeProblem) -> tuple[Expr, Expr, CostTable, CostTable]:
    """Two-player game over channels.

    The minimizing agent sends its moves under a cost choice and receives
    the opponent's under an adversary choice; the maximizing agent mirrors
    this. Final-ply channels carry the leaf value, negated for the
    maximizer, which therefore also minimizes.
    """
    leaves = {}

    def build(node, path, mover_is_max, me_max):
        branches = []
        mine = mover_is_max == me_max
        for i, child in enumerate(node):
            here = path + (i,)
            suffix = "_".join(map(str, here))
            last = not isinstance(child, tuple)
            chan = f"leaf_{suffix}" if last else f"m_{suffix}"
            if last:
                leaves[chan] = float(child)
            act = Send(chan, ()) if mine else Receive(chan, ())
            branches.append(act if last else Seq(act, (build(child, here, not mover_is_max, me_max),)))
        return (CostChoice if mine else AdvChoice)(tuple(branches))

    if not isinstance(t.tree, tuple):
        raise ValueError("game tree needs at least one ply")
    p_min = build(t.tree, (), t.root_max, False)
    p_max = build(t.tree, (), t.root_max, True)
    return (p_min, p_max, CostTable(dict(leaves)),
            CostTable({c: -v for c, v in leaves.items()}))


def competitive(t: GameTreeProblem, seed: int = 0) -> Universe:
    """Minimizer and maximizer playing ``t`` online, one ply per turn.

    The side to move first is spawned first so round-robin order matches
    the ply order.
    """
    p_min, p_max, c_min, c_max = game_programs(t)
    common = {"k": t.depth, "b": INF, "n": 1}
    u = Universe(seed=seed)
    order = [(p_max, c_max), (p_min, c_min)] if t.root_max else [(p_min, c_min), (p_max, c_max)]
    for prog, costs in order:
        u = spawn(u, prog, dict(common, costs=costs))
    return u


def cooperative(program: Expr, overrides: Mapping, agents: int = 3, seed: int = 0) -> Universe:
    """``agents`` copies of one problem, each with its own seed; the team keeps the best."""
    u = Universe(seed=seed)
    for _ in range(agents):
        u = spawn(u, program, dict(overrides))
    return u


def joint_solution_cost(u: Universe) -> float:
    return min((s.result().best_solution_cost for s in u.agents), default=INF)


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def _value(key, raw):
    if key in ("k", "b", "n"):
        return INF if raw in ("inf", "∞") else int(raw)
    if key in ("omega", "alphabet"):
        return frozenset(x for x in raw.split(",") if x)
    if key in ("strongcong", "update", "reinf", "gp", "restart_on_goal"):
        return raw in ("1", "true", "yes")
    if key in ("seed", "iteration_budget", "time_quantum"):
        return int(raw)
    if key == "search_cost_threshold":
        return float(raw)
    raise ValueError(f"unknown agent parameter {key!r}")


def parse_scenario(text: str) -> tuple[list[dict], str]:
    """Split a scenario into per-agent override dicts and the program text.

    Header lines read ``agent <id> key=value ...``; the remaining text is a
    program file whose top-level expressions are assigned to agents in order.
    """
    headers, body = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped.startswith("agent ") or stripped == "agent":
            parts = stripped.split()
            if len(parts) < 2:
                raise ValueError(f"line {lineno}: agent header needs an id")
            opts = {}
            for kv in parts[2:]:
                key, sep, val = kv.partition("=")
                if not sep:
                    raise ValueError(f"line {lineno}: expected key=value, got {kv!r}")
                try:
                    opts[key] = _value(key, val)
                except ValueError as exc:
                    raise ValueError(f"line {lineno}: {exc}") from None
            headers.append(opts)
        else:
            body.append(raw)
    return headers, "\n".join(body)


def load_scenario(text: str, costs: CostTable | None = None, seed: int = 0) -> Universe:
    from .parser import parse
    headers, body = parse_scenario(text)
    programs, defs = parse(body)
    if len(headers) > len(programs):
        raise ValueError(f"{len(headers)} agent headers but only {len(programs)} programs")
    u = Universe(seed=seed)
    for i, prog in enumerate(programs):
        opts = dict(headers[i]) if i < len(headers) else {}
        if costs is not None:
            opts.setdefault("costs", costs)
        opts["defs"] = defs
        u = spawn(u, prog, opts)
    return u
