"""S-expression concrete syntax for $-expressions.

Grammar (every form is parenthesized; ``#`` starts a line comment)::

    expr  := bot | eps | NAME
           | (cost expr*) | (send CH expr*) | (recv CH NAME*) | (quote expr*)
           | (call NAME expr*) | (ncall NAME expr*) | (once NAME expr*)
           | (seq expr*) | (par expr*) | (cchoice expr*) | (achoice expr*)
           | (gchoice [fuzzy] branch*)
    branch := (WEIGHT expr) | expr          -- all weighted or all bare
    def   := (def (NAME NAME*) expr)

A bare NAME is a variable. ``(call f ...)`` denotes a process call when ``f``
has a composite definition in scope and a simple call otherwise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .expr import (
    BOT, EPS, AdvChoice, Bottom, Cost, CostChoice, CostWeight, DefTable,
    Definition, Epsilon, Expr, GenChoice, Par, ProcCall, Receive, Send, Seq,
    SimpleCall, Suppress, Var, WeightMode, is_simple,
)

KEYWORDS = frozenset(
    "cost send recv quote call ncall seq par cchoice achoice gchoice def bot eps once".split())

RESERVED = KEYWORDS | {"fuzzy"}
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_@.'~\-]*\Z")
_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)\Z")


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    column: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("span start after end")


@dataclass
class _Atom:
    text: str
    span: SourceSpan


@dataclass
class _List:
    items: list
    span: SourceSpan


# ---------------------------------------------------------------------------
# Reader
# ---------------------------------------------------------------------------


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _span(text: str, start: int, end: int) -> SourceSpan:
    line, col = _line_col(text, start)
    return SourceSpan(start, end, line, col)


def read_sexprs(text: str) -> list:
    """Read all top-level S-expressions of ``text`` into spanned nodes."""
    out = []
    stack: list[tuple[int, list]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "(":
            stack.append((i, []))
            i += 1
        elif ch == ")":
            if not stack:
                raise ParseError("unbalanced ')'", _span(text, i, i + 1))
            start, items = stack.pop()
            node = _List(items, _span(text, start, i + 1))
            (stack[-1][1] if stack else out).append(node)
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()#":
                j += 1
            node = _Atom(text[i:j], _span(text, i, j))
            (stack[-1][1] if stack else out).append(node)
            i = j
    if stack:
        start, _ = stack[-1]
        raise ParseError("unbalanced '(': missing ')'", _span(text, start, n))
    return out


# ---------------------------------------------------------------------------
# Conversion to Expr
# ---------------------------------------------------------------------------


def _name(node, what: str) -> str:
    if not isinstance(node, _Atom) or not _NAME_RE.match(node.text) or node.text in RESERVED:
        text = node.text if isinstance(node, _Atom) else "(...)"
        raise ParseError(f"expected {what}, got {text!r}", node.span)
    return node.text


def _is_number(node) -> bool:
    return isinstance(node, _Atom) and bool(_NUMBER_RE.match(node.text))


class _Builder:
    def __init__(self, procs: set[str]):
        self.procs = procs

    def expr(self, node) -> Expr:
        if isinstance(node, _Atom):
            if node.text == "bot":
                return BOT
            if node.text == "eps":
                return EPS
            return Var(_name(node, "expression"))
        if not node.items:
            raise ParseError("empty form", node.span)
        head = node.items[0]
        if not isinstance(head, _Atom):
            raise ParseError("form must start with a keyword", head.span)
        kw, rest = head.text, node.items[1:]
        if kw == "cost":
            return Cost(self._many(rest))
        if kw == "quote":
            return Suppress(self._many(rest))
        if kw == "send":
            self._need(node, rest, 1, "send needs a channel")
            return Send(_name(rest[0], "channel name"), self._many(rest[1:]))
        if kw == "recv":
            self._need(node, rest, 1, "recv needs a channel")
            names = tuple(_name(r, "variable name") for r in rest[1:])
            if len(set(names)) != len(names):
                raise ParseError("duplicate receive variable", node.span)
            return Receive(_name(rest[0], "channel name"), names)
        if kw in ("call", "ncall", "once"):
            self._need(node, rest, 1, f"{kw} needs a name")
            name = _name(rest[0], "call name")
            args = self._many(rest[1:])
            if kw == "ncall":
                return SimpleCall(name, args, negated=True)
            if kw == "once":
                return ProcCall(name, args, force_once=True)
            if name in self.procs:
                return ProcCall(name, args)
            return SimpleCall(name, args)
        if kw == "seq":
            kids = self._many(rest)
            if not kids:
                return EPS
            return Seq(kids[0], kids[1:])
        if kw == "par":
            return Par(self._many(rest))
        if kw == "cchoice":
            return CostChoice(self._many(rest))
        if kw == "achoice":
            return AdvChoice(self._many(rest))
        if kw == "gchoice":
            return self._gchoice(node, rest)
        if kw == "def":
            raise ParseError("def is only allowed at top level", node.span)
        raise ParseError(f"unknown keyword {kw!r}", head.span)

    def _need(self, node, rest, k, msg):
        if len(rest) < k:
            raise ParseError(msg, node.span)

    def _many(self, nodes) -> tuple[Expr, ...]:
        return tuple(self.expr(n) for n in nodes)

    def _gchoice(self, node, rest) -> GenChoice:
        mode = WeightMode.PROBABILITY
        if rest and isinstance(rest[0], _Atom) and rest[0].text == "fuzzy":
            mode = WeightMode.FUZZY
            rest = rest[1:]
        weighted = [isinstance(r, _List) and r.items and _is_number(r.items[0]) for r in rest]
        if not rest:
            return GenChoice(())
        if all(weighted):
            branches = []
            for r in rest:
                if len(r.items) != 2:
                    raise ParseError("weighted branch must be (WEIGHT expr)", r.span)
                w = float(r.items[0].text)
                if not 0.0 <= w <= 1.0:
                    raise ParseError(f"weight {w} outside [0, 1]", r.items[0].span)
                branches.append((CostWeight(mode, w), self.expr(r.items[1])))
            return GenChoice(tuple(branches))
        if any(weighted):
            raise ParseError("gchoice mixes weighted and unweighted branches", node.span)
        kids = self._many(rest)
        w = 1.0 / len(kids)
        return GenChoice(tuple((CostWeight(mode, w), k) for k in kids))


def _def_header(node: _List):
    rest = node.items[1:]
    if len(rest) != 2 or not isinstance(rest[0], _List) or not rest[0].items:
        raise ParseError("def must look like (def (NAME PARAM*) BODY)", node.span)
    sig = rest[0].items
    name = _name(sig[0], "definition name")
    params = tuple(_name(p, "parameter name") for p in sig[1:])
    if len(set(params)) != len(params):
        raise ParseError(f"duplicate parameter in definition of {name}", rest[0].span)
    return name, params, rest[1]


def _is_def(node) -> bool:
    return (isinstance(node, _List) and node.items and isinstance(node.items[0], _Atom)
            and node.items[0].text == "def")


def _body_is_simple(node) -> bool:
    return (isinstance(node, _List) and node.items and isinstance(node.items[0], _Atom)
            and node.items[0].text in ("cost", "send", "recv", "quote", "ncall", "call"))


def _calls_process(node, procs: set[str]) -> bool:
    return (isinstance(node, _List) and len(node.items) > 1
            and isinstance(node.items[0], _Atom) and node.items[0].text == "call"
            and isinstance(node.items[1], _Atom) and node.items[1].text in procs)


def parse(text: str, context: DefTable | None = None) -> tuple[list[Expr], DefTable]:
    """Parse a program text into its top-level programs and definition table.

    ``context`` supplies definitions from elsewhere; they decide call kinds
    and are merged into the returned table.
    """
    nodes = read_sexprs(text)
    context = context or DefTable()
    headers = {}
    for node in nodes:
        if _is_def(node):
            name, params, body = _def_header(node)
            if name in headers or name in context:
                raise ParseError(f"duplicate definition of {name!r}", node.span)
            headers[name] = (params, body, node)

    procs = {n for n, d in context.definitions.items() if not d.atomic}
    procs |= {n for n, (_, body, _) in headers.items() if not _body_is_simple(body)}
    # a definition whose body is a call of a process is itself a process
    changed = True
    while changed:
        changed = False
        for n, (_, body, _) in headers.items():
            if n not in procs and _calls_process(body, procs):
                procs.add(n)
                changed = True
    builder = _Builder(procs)

    defs = dict(context.definitions)
    programs = []
    for node in nodes:
        if _is_def(node):
            name = _def_header(node)[0]
            params, body_node, _ = headers[name]
            body = builder.expr(body_node)
            try:
                d = Definition(name, params, body, atomic=is_simple(body))
            except ValueError as exc:
                raise ParseError(str(exc), node.span) from None
            defs[name] = d
        else:
            programs.append(builder.expr(node))
    return programs, DefTable(defs, context.alphabets)


def parse_expr(text: str, context: DefTable | None = None) -> Expr:
    programs, _ = parse(text, context)
    if len(programs) != 1:
        raise ParseError(f"expected exactly one expression, found {len(programs)}",
                         SourceSpan(0, len(text), 1, 1))
    return programs[0]


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_GLYPHS = {
    "cost": "$", "send": "→", "recv": "←", "quote": "'", "ncall": "¬",
    "seq": "∘", "par": "∥", "cchoice": "⊕", "achoice": "⊖", "gchoice": "⊔",
    "once": "¹", "bot": "⊥", "eps": "ε", "def": ":=",
}


def format_weight(w: float) -> str:
    return repr(float(w))


def print_expr(e: Expr, pretty: bool = False) -> str:
    """Canonical text of ``e``; ``pretty`` swaps keywords for Unicode glyphs."""
    g = (lambda kw: _GLYPHS[kw]) if pretty else (lambda kw: kw)

    def form(kw, *parts):
        return "(" + " ".join((g(kw),) + parts) + ")"

    def p(e):
        if isinstance(e, Bottom):
            return g("bot")
        if isinstance(e, Epsilon):
            return g("eps")
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Cost):
            return form("cost", *map(p, e.children))
        if isinstance(e, Suppress):
            return form("quote", *map(p, e.children))
        if isinstance(e, Send):
            return form("send", e.channel, *map(p, e.children))
        if isinstance(e, Receive):
            return form("recv", e.channel, *e.vars)
        if isinstance(e, SimpleCall):
            kw = "ncall" if e.negated else "call"
            if pretty:
                return "(" + " ".join(((("¬" if e.negated else "") + e.name),) + tuple(map(p, e.args))) + ")"
            return form(kw, e.name, *map(p, e.args))
        if isinstance(e, ProcCall):
            if e.force_once:
                return form("once", e.name, *map(p, e.args))
            if pretty:
                return "(" + " ".join((e.name,) + tuple(map(p, e.args))) + ")"
            return form("call", e.name, *map(p, e.args))
        if isinstance(e, Seq):
            return form("seq", p(e.head), *map(p, e.tail))
        if isinstance(e, Par):
            return form("par", *map(p, e.children))
        if isinstance(e, CostChoice):
            return form("cchoice", *map(p, e.children))
        if isinstance(e, AdvChoice):
            return form("achoice", *map(p, e.children))
        if isinstance(e, GenChoice):
            parts = []
            if e.branches and e.branches[0][0].mode is WeightMode.FUZZY:
                parts.append("fuzzy")
            parts += [f"({format_weight(w.w)} {p(c)})" for w, c in e.branches]
            return form("gchoice", *parts)
        raise TypeError(f"not an expression: {e!r}")

    return p(e)


def print_definition(d: Definition, pretty: bool = False) -> str:
    sig = "(" + " ".join((d.name,) + d.params) + ")"
    kw = _GLYPHS["def"] if pretty else "def"
    return f"({kw} {sig} {print_expr(d.body, pretty)})"


def print_program(programs: list[Expr], defs: DefTable | None = None,
                  pretty: bool = False) -> str:
    lines = []
    if defs is not None:
        lines += [print_definition(defs.definitions[n], pretty) for n in defs.definitions]
    lines += [print_expr(e, pretty) for e in programs]
    return "\n".join(lines) + ("\n" if lines else "")

