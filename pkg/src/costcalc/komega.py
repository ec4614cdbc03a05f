"""The kΩ-optimization meta-search loop.

One agent repeats ``goal? -> select -> examine -> execute -> update`` over a
configuration. ``k`` bounds the depth of deliberation, ``b`` the branching
factor, ``n`` the number of steps executed per cycle (0 = offline), and
``omega``/``alphabet`` decide which labels are optimized over and which are
hidden behind ε. ``math.inf`` stands for an unbounded parameter.
"""

from __future__ import annotations

import copy
import logging
import math
import random
from collections import deque
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, fields, replace

from .cost import (
    Aggregator, CostTable, MetricRegistry, STANDARD, aggregate, default_registry,
    random_costs, rl_update, scalar_key,
)
from .errors import BudgetExhausted, IllegalAction, InvalidOverride
from .expr import (
    CostChoice, Epsilon, Expr, SimpleCall, names_in, random_expr, replace_at,
    structural_equal, subterms, BOT,
)
from .lts import (
    Action, ChoiceStep, Config, Item, action_cost, item_cost, run_reactive,
    transitions,
)

log = logging.getLogger(__name__)

INF = math.inf
DEFAULT_NAMES = ("a", "b", "c")
GP_CROSSOVER_RATE = 0.9


def _keyed_rng(*key) -> random.Random:
    # string seeds hash deterministically, independent of PYTHONHASHSEED
    return random.Random(":".join(map(str, key)))


# ---------------------------------------------------------------------------
# Goals
# ---------------------------------------------------------------------------


class QuantumExpired(Exception):
    pass


class Quantum:
    """Step allowance handed to goal predicates."""

    def __init__(self, steps: int):
        self.left = steps

    def tick(self, n: int = 1):
        self.left -= n
        if self.left < 0:
            raise QuantumExpired


@dataclass(frozen=True)
class Goal:
    """Termination condition of an episode.

    ``default``: the agent's expression has run to ε. ``predicate``: a Python
    callable ``(config, agent, quantum) -> bool``. ``expr``: a $-expression
    that must run to ε within the quantum in the configuration's definitions.
    A check that exhausts its quantum counts as not reached.
    """

    kind: str = "default"
    predicate: Callable | None = None
    expr: Expr | None = None
    time_quantum: int = 10_000

    def reached(self, config: Config, agent=0) -> bool:
        quantum = Quantum(self.time_quantum)
        try:
            if self.kind == "default":
                return config.terminated(agent)
            if self.kind == "predicate":
                return bool(self.predicate(config, agent, quantum))
            if self.kind == "expr":
                probe = Config(((agent, self.expr),), config.defs)
                trace = run_reactive(probe, self.time_quantum, seed=0)
                quantum.tick(len(trace))
                final = trace[-1][1] if trace else probe
                return final.terminated(agent)
        except QuantumExpired:
            return False
        raise ValueError(f"unknown goal kind {self.kind!r}")


def _zero_estimate(config: Config) -> float:
    return 0.0


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KOmegaConfig:
    """Search-state record of one agent's kΩ procedure.

    ``omega``/``alphabet`` of ``None`` mean the whole universe of names.
    """

    k: float = INF
    b: float = INF
    n: float = INF
    omega: frozenset | None = None
    alphabet: frozenset | None = None
    gp: bool = False
    reinf: bool = False
    strongcong: bool = False
    update: bool = False
    goal: Goal = Goal()
    costs: CostTable = CostTable()
    true_costs: CostTable | None = None
    metrics: MetricRegistry = field(default_factory=default_registry)
    metric: str = STANDARD
    agg: Aggregator = Aggregator()
    eps_estimator: Callable[[Config], float] = _zero_estimate
    seed: int = 0
    agent: object = 0
    time_quantum: int = 10_000
    iteration_budget: int = 10_000
    search_cost_threshold: float | None = None
    adjust_both: bool = False
    search_unit_cost: float = 0.01
    max_tree_nodes: int = 200_000
    c_max: int = 256
    restart_on_goal: bool = False
    pending_overrides: Mapping | None = None
    reinit_count: int = 0

    def visible(self, label: str) -> bool:
        """Whether ``label`` belongs to ``A ∪ Ω`` and keeps its name in the tree."""
        if self.omega is None or self.alphabet is None:
            return True
        base = label.split("@", 1)[0]
        scope = self.omega | self.alphabet
        return label in scope or base in scope

    def ignored(self, label: str) -> bool:
        """Whether ``label`` lies in ``A − Ω`` and is priced as neutral ε during examine."""
        if self.alphabet is None or self.omega is None:
            return False
        base = label.split("@", 1)[0]
        own = label in self.alphabet or base in self.alphabet
        wanted = label in self.omega or base in self.omega
        return own and not wanted


_FIELD_NAMES = {f.name for f in fields(KOmegaConfig)}
_COUNTS = ("k", "b", "n")


def _check_count(name, v):
    if v == INF:
        return INF
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 or v != int(v):
        raise InvalidOverride(f"{name} must be a non-negative integer or inf, got {v!r}")
    return int(v)


def init(overrides: Mapping | None = None) -> tuple[KOmegaConfig, Config]:
    """Build the initial search parameters and configuration.

    Recognized keys are the fields of :class:`KOmegaConfig` plus ``program``
    (an Expr) and ``defs`` (a DefTable). Without a program a random one is
    generated and ``gp`` is set. Without costs but with ``reinf`` the costs
    are randomized. If the program is ⊥ or ``k = n = 0`` the offending values
    are reset to their defaults and ``reinit_count`` records it.
    """
    overrides = dict(overrides or {})
    program = overrides.pop("program", None)
    defs = overrides.pop("defs", None)
    unknown = set(overrides) - _FIELD_NAMES
    if unknown:
        raise InvalidOverride(f"unknown parameter(s): {sorted(unknown)}")
    for name in _COUNTS:
        if name in overrides:
            overrides[name] = _check_count(name, overrides[name])
    if "omega" in overrides and overrides["omega"] is not None:
        overrides["omega"] = frozenset(overrides["omega"])
    if "alphabet" in overrides and overrides["alphabet"] is not None:
        overrides["alphabet"] = frozenset(overrides["alphabet"])
    cfg = KOmegaConfig(**overrides)
    rng = _keyed_rng(cfg.seed, "init")

    def random_program():
        names = set(cfg.alphabet or ()) | set(cfg.omega or ()) or set(DEFAULT_NAMES)
        return random_expr(rng, names, depth=2)

    if program is None:
        program = random_program()
        cfg = replace(cfg, gp=overrides.get("gp", True))
    reinits = 0
    while True:
        bottom = structural_equal(program, BOT)
        idle = cfg.k == 0 and cfg.n == 0
        if not (bottom or idle):
            break
        reinits += 1
        log.info("init condition failed (bottom=%s, k=n=0: %s); re-initializing", bottom, idle)
        if bottom:
            program = random_program()
            cfg = replace(cfg, gp=True)
        if idle:
            cfg = replace(cfg, k=INF, n=INF)
    if "costs" not in overrides and cfg.reinf:
        cfg = replace(cfg, costs=random_costs(rng, names_in(program) or DEFAULT_NAMES))
    cfg = replace(cfg, reinit_count=cfg.reinit_count + reinits)
    from .expr import DefTable
    config = Config(((cfg.agent, program),), defs or DefTable())
    return cfg, config


# ---------------------------------------------------------------------------
# Search tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    """Tree edge: the action, its optimization cost and its execution cost.

    ``masked`` is ``weak`` or ``strong`` when some label was hidden behind ε.
    ``variation`` marks genetic-programming edges, executed by rewriting the
    agent's program rather than by a transition.
    """

    action: Action
    cost: float
    exam_cost: float
    true_cost: float
    labels: tuple[str, ...]
    masked: str | None = None
    choices: tuple[ChoiceStep, ...] = ()
    variation: bool = False


@dataclass(eq=False)
class Node:
    id: int
    config: Config
    parent: int | None
    edge: Edge | None
    depth: int
    children: list[int] = field(default_factory=list)
    expanded: bool = False
    is_goal: bool = False
    value: float = 0.0
    best: int | None = None
    dirty: bool = True


class SearchTree:
    """Select-phase tree; configurations as nodes, actions as edges."""

    def __init__(self, config: Config, episode: int = 0):
        self.nodes: list[Node] = []
        self.episode = episode
        self.search_cost = 0.0
        self.root = self._new(config, None, None, 0).id
        self.current = self.root

    def _new(self, config, parent, edge, depth) -> Node:
        node = Node(len(self.nodes), config, parent, edge, depth)
        self.nodes.append(node)
        return node

    def __len__(self):
        return len(self.nodes)

    def clone(self) -> SearchTree:
        new = copy.copy(self)
        new.nodes = [replace(n, children=list(n.children)) for n in self.nodes]
        return new

    def __getitem__(self, nid: int) -> Node:
        return self.nodes[nid]

    def principal_path(self, start: int | None = None) -> list[int]:
        """Node ids from ``start`` (default root) following examine's picks."""
        nid = self.root if start is None else start
        path = [nid]
        while self.nodes[nid].best is not None:
            nid = self.nodes[nid].best
            path.append(nid)
        return path

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes if not n.children]

    def out_degree(self) -> int:
        return max((len(n.children) for n in self.nodes), default=0)


def own_transitions(config: Config, cfg: KOmegaConfig) -> list:
    """Transitions in which every fired label belongs to the agent or to one of its rendezvous.

    Joint steps that merely bundle another agent's independent moves are
    left to that agent.
    """
    return transitions(config, involving=cfg.agent, c_max=cfg.c_max, exclusive=True)


def _edge_for(cfg: KOmegaConfig, action: Action, choices, config: Config) -> Edge:
    cost = exam = true = 0.0
    masked = None
    labels = []
    table = cfg.costs
    for it in action.items:
        real = item_cost(it, table, cfg.metrics, cfg.metric, config.defs)
        true += real
        if it.kind == "eps":
            labels.append("eps")
            continue
        if it.kind == "comm" or cfg.visible(it.label):
            labels.append(it.label)
            cost += real
            exam += 0.0 if cfg.ignored(it.label) else real
        elif cfg.strongcong:
            masked = "strong"
            labels.append("eps")
            cost += real
            exam += real
        else:
            masked = masked or "weak"
            labels.append("eps")
    return Edge(action, cost, exam, true, tuple(labels), masked, tuple(choices))


def _variation(cfg: KOmegaConfig, tree: SearchTree, node: Node, rng: random.Random) -> Config:
    """Crossover with another frontier expression, or mutation of a random subtree."""
    agent = cfg.agent
    mine = node.config.expr(agent)
    spots = list(subterms(mine))
    others = [n for n in tree.nodes if n is not node and not n.children]
    if others and rng.random() < GP_CROSSOVER_RATE:
        donor = rng.choice(others).config.expr(agent)
        _, piece = rng.choice(list(subterms(donor)))
    else:
        names = set(cfg.alphabet or ()) | set(cfg.omega or ()) or names_in(mine) or set(DEFAULT_NAMES)
        piece = random_expr(rng, names, depth=2)
    path, _ = rng.choice(spots)
    candidate = replace_at(mine, path, piece)
    try:
        return node.config.with_expr(agent, candidate)
    except ValueError:  # the graft captured a bound variable out of scope
        return node.config.with_expr(agent, piece if not _free(piece) else mine)


def _free(e):
    from .expr import free_vars
    return free_vars(e)


def _expand(cfg: KOmegaConfig, tree: SearchTree, node: Node) -> list[Node]:
    agent = cfg.agent
    ts = own_transitions(node.config, cfg)
    cands = []
    for t in ts:
        choices = tuple(t.choices.get(agent, ()))
        cands.append((_edge_for(cfg, t.action, choices, node.config), t.target))
    rng = _keyed_rng(cfg.seed, tree.episode, node.id, "expand")
    if cfg.gp:
        target = _variation(cfg, tree, node, rng)
        item = Item(agent, "eps", "eps", ())
        cands.append((Edge(Action((item,)), 0.0, 0.0, 0.0, ("eps",), "weak", (), True), target))
    if cfg.b != INF and len(cands) > cfg.b:
        def score(c):
            edge, target = c
            h = cfg.eps_estimator(target) if cfg.strongcong else 0.0
            return edge.cost + h
        ranked = sorted(((score(c), rng.random(), i) for i, c in enumerate(cands)))
        keep = sorted(i for _, _, i in ranked[: int(cfg.b)])
        cands = [cands[i] for i in keep]
    node.expanded = True
    kids = []
    for edge, target in cands:
        child = tree._new(target, node.id, edge, node.depth + 1)
        child.is_goal = cfg.goal.reached(target, agent)
        node.children.append(child.id)
        kids.append(child)
    tree.search_cost += cfg.search_unit_cost * (1 + len(kids))
    return kids


def _mark_dirty_upwards(tree: SearchTree, nid: int | None):
    while nid is not None:
        node = tree.nodes[nid]
        node.dirty = True
        nid = node.parent


def select(cfg: KOmegaConfig, tree: SearchTree) -> SearchTree:
    """Grow the tree from its current node, at most ``k`` deep and ``b`` wide.

    Skipped when ``k = 0`` or ``b = 0``. Goal nodes become leaves.
    """
    if cfg.k == 0 or cfg.b == 0:
        return tree
    start = tree.current
    queue = deque([(start, 0)])
    while queue:
        nid, d = queue.popleft()
        node = tree.nodes[nid]
        if node.is_goal:
            continue
        if node.expanded:
            queue.extend((c, d + 1) for c in node.children)
            continue
        if d >= cfg.k or len(tree) >= cfg.max_tree_nodes:
            continue
        kids = _expand(cfg, tree, node)
        queue.extend((c.id, d + 1) for c in kids)
    _mark_dirty_upwards(tree, start)
    return tree


# ---------------------------------------------------------------------------
# Examine
# ---------------------------------------------------------------------------


def _decide(entries, level, rng):
    """Back up ``(choices, value, child)`` entries through nested choices.

    Entries without a further choice at ``level`` are the agent's own
    nondeterminism and are minimized, like distinct choice points met at the
    same level. Returns ``(value, picked child id)``.
    """
    options = []  # (value, child)
    groups: dict = {}
    for choices, value, child in entries:
        if len(choices) <= level:
            options.append((value, child))
        else:
            groups.setdefault(choices[level].position, []).append((choices, value, child))
    for position in sorted(groups):
        group = groups[position]
        kind = group[0][0][level].kind
        branches: dict = {}
        for entry in group:
            branches.setdefault(entry[0][level].branch, []).append(entry)
        backed = []  # (branch, weight, value, child)
        for br in sorted(branches):
            v, c = _decide(branches[br], level + 1, rng)
            backed.append((br, branches[br][0][0][level].weight, v, c))
        options.append(_combine_choice(kind, backed, rng))
    if not options:
        return math.inf, None
    best = min(v for v, _ in options)
    ties = [c for v, c in options if v == best]
    return best, ties[rng.randrange(len(ties))] if len(ties) > 1 else ties[0]


def _combine_choice(kind, backed, rng):
    values = [v for _, _, v, _ in backed]
    if kind == "cchoice":
        target = min(values)
    elif kind == "achoice":
        target = max(values)
    else:
        weights = [w.w for _, w, _, _ in backed]
        if backed[0][1].mode.value == "probability":
            total = sum(weights)
            if total <= 0:
                return math.inf, None
            value = sum((0.0 if w == 0 else w * v) for w, v in zip(weights, values)) / total
            pick = rng.choices(range(len(backed)), weights=weights)[0]
            return value, backed[pick][3]
        products = [0.0 if w == 0 else w * v for w, v in zip(weights, values)]
        top = max(products)
        ties = [i for i, p in enumerate(products) if p == top]
        i = ties[rng.randrange(len(ties))] if len(ties) > 1 else ties[0]
        return values[i], backed[i][3]
    ties = [c for _, _, v, c in backed if v == target]
    return target, ties[rng.randrange(len(ties))] if len(ties) > 1 else ties[0]


def examine(cfg: KOmegaConfig, tree: SearchTree) -> SearchTree:
    """Back up costs bottom-up and record the pruned (principal) choice at each node.

    Cost choices keep their cheapest branch and adversary choices their most
    expensive one; ties are broken by a draw keyed to the node. Unexpanded
    leaves are priced by the strong-ε estimator (or 0 under weak masking).
    """
    if cfg.k == 0 or cfg.b == 0:
        return tree
    dirty = sorted((n for n in tree.nodes if n.dirty), key=lambda n: -n.depth)
    for node in dirty:
        node.best = None
        if node.is_goal:
            node.value = 0.0
        elif not node.expanded:
            node.value = cfg.eps_estimator(node.config) if cfg.strongcong else 0.0
        elif not node.children:
            node.value = math.inf
        else:
            rng = _keyed_rng(cfg.seed, tree.episode, node.id, "examine")
            entries = []
            for cid in node.children:
                child = tree.nodes[cid]
                entries.append((child.edge.choices, child.edge.exam_cost + child.value, cid))
            node.value, node.best = _decide(entries, 0, rng)
        node.dirty = False
    return tree


# ---------------------------------------------------------------------------
# Execute and update
# ---------------------------------------------------------------------------


@dataclass
class ExecReport:
    steps: int = 0
    interrupted: bool = False
    solution_cost: float = 0.0
    search_cost: float = 0.0
    executed: list = field(default_factory=list)  # (Action, observed cost)
    goal_reached: bool = False
    failed: bool = False


def _observed(cfg: KOmegaConfig, action: Action, defs) -> float:
    table = cfg.true_costs or cfg.costs
    return action_cost(action, table, cfg.metrics, cfg.metric, defs)


def _fire(cfg, config: Config, edge: Edge, target: Config):
    """Execute one tree edge on the live configuration, or return None if it is stale."""
    if edge.variation:
        return config.with_expr(cfg.agent, target.expr(cfg.agent))
    for t in own_transitions(config, cfg):
        if t.action == edge.action:
            return t.target
    return None


def execute(cfg: KOmegaConfig, tree: SearchTree | None, config: Config,
            iteration: int = 0) -> tuple[Config, ExecReport]:
    """Run the optimal path: fully when offline and a goal is in reach, ``n`` steps when online.

    Offline without a goal in the tree nothing runs; the cheapest leaf
    becomes the node expanded next cycle. Steps beyond the tree are taken
    reactively.
    """
    report = ExecReport(search_cost=tree.search_cost if tree else 0.0)
    agent = cfg.agent
    path = tree.principal_path() if tree is not None else []
    if tree is not None and path:
        if tree.nodes[path[0]].value == math.inf:
            report.failed = True
            return config, report
    if cfg.n == 0:
        if tree is None:
            return config, report
        leaf = tree.nodes[path[-1]]
        if not leaf.is_goal:
            if leaf.expanded:  # dead end picked: nothing left to expand
                report.failed = True
            tree.current = leaf.id
            return config, report
        budget = INF
    else:
        budget = cfg.n
    for nid in path[1:]:
        if report.steps >= budget:
            break
        node = tree.nodes[nid]
        nxt = _fire(cfg, config, node.edge, node.config)
        if nxt is None:
            report.interrupted = True
            break
        cost = 0.0 if node.edge.variation else _observed(cfg, node.edge.action, config.defs)
        report.executed.append((node.edge.action, cost))
        report.solution_cost += cost
        report.steps += 1
        config = nxt
        if tree is not None:
            tree.current = nid
    if not report.interrupted and report.steps < budget and not cfg.goal.reached(config, agent):
        # beyond the deliberation horizon: act without optimization
        rng = _keyed_rng(cfg.seed, getattr(tree, "episode", 0), iteration, "reactive")
        limit = min(budget - report.steps, cfg.time_quantum)
        taken = 0
        while taken < limit and not cfg.goal.reached(config, agent):
            options = own_transitions(config, cfg)
            if not options:
                break
            t = options[rng.randrange(len(options))]
            cost = _observed(cfg, t.action, config.defs)
            report.executed.append((t.action, cost))
            report.solution_cost += cost
            report.steps += 1
            taken += 1
            config = t.target
    report.goal_reached = cfg.goal.reached(config, agent)
    return config, report


def update(cfg: KOmegaConfig, report: ExecReport) -> KOmegaConfig:
    """Self-modification of ``k``, ``b``, ``n`` after a cycle.

    Without the ``update`` flag this is the identity. User overrides, when
    pending, replace self-modification. Order: interruption clause chain,
    promotion of ``k``/``b`` when ``n = k``, increment of ``n`` while
    ``0 < n <= k``, search-cost threshold adjustment, RL cost update.
    """
    if not cfg.update:
        return cfg
    if cfg.pending_overrides:
        changes = dict(cfg.pending_overrides)
        for name in _COUNTS:
            if name in changes:
                changes[name] = _check_count(name, changes[name])
        unknown = set(changes) - _FIELD_NAMES
        if unknown:
            raise InvalidOverride(f"unknown parameter(s): {sorted(unknown)}")
        return replace(cfg, pending_overrides=None, **changes)
    k, b, n = cfg.k, cfg.b, cfg.n
    if report.interrupted:
        if n == INF:
            n = 10
        elif n != 0:
            n = n - 1
        elif k == INF:
            k = 10
        else:
            k = max(k - 1, 0)
    else:
        if n == k:
            k, b = k + 1, b + 1
        if 0 < n and n + 1 <= k:
            n = n + 1
    if cfg.search_cost_threshold is not None:
        if report.search_cost > cfg.search_cost_threshold:
            if k != INF:
                k = max(k - 1, 1)
            if cfg.adjust_both and b != INF:
                b = max(b - 1, 1)
        else:
            k = k + 1
            if cfg.adjust_both:
                b = b + 1
    costs = cfg.costs
    if cfg.reinf:
        labels = [(it.label, c) for a, c in report.executed for it in a.items]
        for i, (label, observed) in enumerate(labels):
            nxt = costs.lookup(labels[i + 1][0]) if i + 1 < len(labels) else 0.0
            per_item = observed / max(1, 1)
            costs = rl_update(costs, (label, per_item, nxt))
    return replace(cfg, k=k, b=b, n=n, costs=costs)


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    best_config: KOmegaConfig | None
    best_search_cost: float
    best_solution_cost: float
    aggregated: float | tuple
    iterations: int
    goal_reached: bool
    elapsed_steps: int
    trace: list = field(default_factory=list)  # executed (Action, cost) of the elite episode
    history: list = field(default_factory=list)  # best-so-far aggregated cost per iteration
    solutions: int = 0
    root_values: list = field(default_factory=list)

    def lines(self) -> list[str]:
        from .lts import format_cost

        def fmt(v):
            if isinstance(v, tuple):
                return "(" + ", ".join(format_cost(x) for x in v) + ")"
            return format_cost(v)

        out = [
            f"iterations: {self.iterations}",
            f"goal_reached: {'true' if self.goal_reached else 'false'}",
            f"search_cost: {fmt(self.best_search_cost)}",
            f"solution_cost: {fmt(self.best_solution_cost)}",
            f"aggregated_cost: {fmt(self.aggregated)}",
            f"elapsed_steps: {self.elapsed_steps}",
            f"solutions: {self.solutions}",
            "path: " + " ".join(",".join(a.labels) for a, _ in self.trace),
        ]
        if self.best_config is not None:
            c = self.best_config
            out.append(f"params: k={fmt(c.k)} b={fmt(c.b)} n={fmt(c.n)}")
        return out


class KOmegaSearch:
    """Loop state of one agent; ``iterate`` advances one select-examine-execute cycle."""

    def __init__(self, cfg: KOmegaConfig, initial: Config, wait_when_blocked: bool = False):
        self.cfg = cfg
        self.wait_when_blocked = wait_when_blocked
        self.initial_expr = initial.expr(cfg.agent)
        self.tree: SearchTree | None = None
        self.episode = 0
        self.iterations = 0
        self.elapsed_steps = 0
        self.episode_search = 0.0
        self.episode_solution = 0.0
        self.episode_trace: list = []
        self.best = None  # (key, aggregated, search, solution, cfg, trace)
        self.history: list = []
        self.solutions = 0
        self.finished = False
        self.any_goal = False
        self.root_values: list = []
        self.first_search_cost: float | None = None

    def clone(self) -> KOmegaSearch:
        """Independent copy; configurations and parameters are immutable and shared."""
        new = copy.copy(self)
        new.history = list(self.history)
        new.episode_trace = list(self.episode_trace)
        new.root_values = list(self.root_values)
        new.tree = self.tree.clone() if self.tree is not None else None
        return new

    # -- bookkeeping -------------------------------------------------------

    def _record_solution(self):
        agg = aggregate(self.episode_search, self.episode_solution, self.cfg.agg)
        key = scalar_key(agg)
        self.solutions += 1
        self.any_goal = True
        if self.best is None or key < self.best[0]:
            self.best = (key, agg, self.episode_search, self.episode_solution,
                         self.cfg, list(self.episode_trace))

    def _new_episode(self, config: Config) -> Config:
        self.episode += 1
        self.tree = None
        self.episode_search = self.episode_solution = 0.0
        self.episode_trace = []
        return config.with_expr(self.cfg.agent, self.initial_expr)

    def best_so_far(self):
        return self.best[1] if self.best is not None else math.inf

    # -- one cycle ---------------------------------------------------------

    def iterate(self, config: Config) -> Config:
        cfg = self.cfg
        agent = cfg.agent
        if cfg.goal.reached(config, agent):
            self._record_solution()
            if not cfg.restart_on_goal:
                self.finished = True
                return config
            config = self._new_episode(config)
        elif not own_transitions(config, cfg):
            if self.wait_when_blocked:
                self.iterations += 1
                self.history.append(self.best_so_far())
                return config
            if not cfg.restart_on_goal:
                self.finished = True
                return config
            config = self._new_episode(config)

        searching = cfg.k != 0 and cfg.b != 0
        if searching:
            if self.tree is None or cfg.n != 0:
                self.tree = SearchTree(config, self.episode)
            before = self.tree.search_cost
            select(cfg, self.tree)
            examine(cfg, self.tree)
            self.root_values.append(self.tree.nodes[self.tree.root].value)
            self.episode_search += self.tree.search_cost - before
        else:
            self.tree = None
        config, report = execute(cfg, self.tree if searching else None, config, self.iterations)
        report.search_cost = self.episode_search
        self.episode_solution += report.solution_cost
        self.episode_trace.extend(report.executed)
        self.elapsed_steps += report.steps
        if report.interrupted:
            self.tree = None
        if report.failed:
            if cfg.restart_on_goal:
                config = self._new_episode(config)
            else:
                self.finished = True
        if self.first_search_cost is None and cfg.update and cfg.search_cost_threshold is None:
            self.first_search_cost = self.episode_search
            self.cfg = replace(self.cfg, search_cost_threshold=10 * self.episode_search)
        self.cfg = update(self.cfg, report)
        self.iterations += 1
        if cfg.goal.reached(config, agent) and not cfg.restart_on_goal:
            self._record_solution()
            self.finished = True
        self.history.append(self.best_so_far())
        return config

    def result(self) -> RunResult:
        if self.best is None:
            return RunResult(None, self.episode_search, math.inf, math.inf, self.iterations,
                             False, self.elapsed_steps, list(self.episode_trace),
                             list(self.history), 0, list(self.root_values))
        _, agg, search, solution, cfg, trace = self.best
        return RunResult(cfg, search, solution, agg, self.iterations, True, self.elapsed_steps,
                         trace, list(self.history), self.solutions, list(self.root_values))


def run(program: Expr | None, overrides: Mapping | None = None) -> RunResult:
    """Iterate the loop until the goal holds (or forever with restarts) within the budget.

    With ``restart_on_goal`` every reached goal is recorded and the search
    starts over; the best solution ever seen is returned. Raises
    :class:`BudgetExhausted` if the budget runs out before any goal.
    """
    overrides = dict(overrides or {})
    if program is not None:
        overrides["program"] = program
    cfg, config = init(overrides)
    search = KOmegaSearch(cfg, config)
    while search.iterations < cfg.iteration_budget and not search.finished:
        config = search.iterate(config)
    if not search.finished and not search.any_goal and search.cfg.goal.reached(config, cfg.agent):
        search._record_solution()
    result = search.result()
    if not search.finished and not search.any_goal:
        raise BudgetExhausted(
            f"no goal reached within {cfg.iteration_budget} iterations", result)
    return result


# ---------------------------------------------------------------------------
# Self-tuning: the loop applied to its own parameters
# ---------------------------------------------------------------------------

TUNED = ("k", "b", "n", "search_cost_threshold")


def _measure(benchmark, params: Mapping) -> float:
    try:
        res = benchmark(dict(params))
    except BudgetExhausted:
        return math.inf
    value = res.aggregated
    if isinstance(value, tuple):
        value = value[0] + value[1]
    return value if res.goal_reached else math.inf


def _neighbours(params: Mapping) -> list[dict]:
    out = []

    def with_(name, v):
        p = dict(params)
        p[name] = v
        if p not in out and p != dict(params):
            out.append(p)

    for name, floor in (("k", 1), ("b", 1), ("n", 0)):
        v = params[name]
        if v == INF:
            with_(name, 10)
        else:
            with_(name, v + 1)
            if v - 1 >= floor:
                with_(name, v - 1)
            with_(name, INF)
    thr = params.get("search_cost_threshold")
    if thr is not None:
        with_("search_cost_threshold", thr * 2)
        with_("search_cost_threshold", thr / 2)
    return out


def self_tune(benchmark: Callable[[dict], RunResult], initial: KOmegaConfig,
              rounds: int = 3, seed: int = 0) -> KOmegaConfig:
    """Tune ``(k, b, n, threshold)`` by running kΩ over them.

    Each round the candidate parameter vectors around the elite become the
    branches of a cost choice whose label costs are the measured aggregated
    costs of the benchmark; a one-step online kΩ run picks among them. The
    elite only changes on strict improvement, so the returned configuration
    never measures worse than ``initial``.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    current = {name: getattr(initial, name) for name in TUNED}
    elite_cost = _measure(benchmark, current)
    seen = {tuple(sorted(current.items(), key=lambda kv: kv[0])): elite_cost}
    for r in range(rounds):
        cands = _neighbours(current)
        costs = {}
        for i, p in enumerate(cands):
            key = tuple(sorted(p.items(), key=lambda kv: kv[0]))
            if key not in seen:
                seen[key] = _measure(benchmark, p)
            if math.isfinite(seen[key]):
                costs[f"cfg{i}"] = seen[key]
        if not costs:
            break
        outer = CostChoice(tuple(SimpleCall(label) for label in sorted(costs)))
        res = run(outer, {"k": 1, "b": INF, "n": 1, "costs": CostTable(costs),
                          "seed": seed + r, "search_unit_cost": 0.0})
        picked = res.trace[0][0].labels[0]
        chosen = cands[int(picked[3:])]
        if costs[picked] < elite_cost:
            current, elite_cost = chosen, costs[picked]
            log.info("self-tune round %d: new elite %s at %s", r, current, elite_cost)
    return replace(initial, **current)
