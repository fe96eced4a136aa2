"""Finite-trace properties over recorded snapshots.

Grammar (EBNF)::

    file        = { [ label ":" ] property ( ";" | NEWLINE ) } ;
    property    = implication ;
    implication = disjunction [ "->" implication ] ;
    disjunction = conjunction { ( "or" | "||" ) conjunction } ;
    conjunction = unary { ( "and" | "&&" ) unary } ;
    unary       = ( "not" | "!" ) unary | primary ;
    primary     = "(" property ")" | "true" | "false"
                | ( "always" | "eventually" ) "(" property ")"
                | "atMostConsecutive" "(" property "," INTEGER ")"
                | atom ;
    atom        = IDENT "(" [ arg { "," arg } ] ")" [ "@" PHASE ] ;
    arg         = STRING | NUMBER | IDENT ;
    PHASE       = "MONITORED" | "ANALYZED" | "PLANNED" ;

``#`` starts a comment. Newlines inside parentheses do not end a property.

Semantics: a property is evaluated at the first snapshot. ``always``,
``eventually`` and ``atMostConsecutive`` quantify over the snapshots from
the current one onwards, restricted to the phases their body speaks about:
an atom filtered with ``@ PHASE`` is false at snapshots of other phases,
and a temporal operator whose body only mentions filtered atoms ranges over
the sub-trace of those phases. ``atMostConsecutive(p, n)`` fails when more
than ``n`` consecutive positions of that sub-trace satisfy ``p``.
"""

from __future__ import annotations

import re
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import Any, Union

from .compare import check_constraints, critical_ids, equal, registered_constraints
from .errors import InvalidArgumentError, ParseError, UnknownPredicateError
from .mape import Phase, Trace, project
from .model import RTM, AnnotationKind, Lifecycle, base_id

__all__ = [
    "Atom",
    "Const",
    "Not",
    "And",
    "Or",
    "Implies",
    "Always",
    "Eventually",
    "AtMostConsecutive",
    "TraceProperty",
    "PredicateContext",
    "register_predicate",
    "registered_predicates",
    "check_predicates",
    "parse_property",
    "parse_properties",
    "load_properties",
    "PropertyVerdict",
    "evaluate",
    "evaluate_state",
    "is_grey_box",
    "evaluate_on_campaign",
]


# -- AST -------------------------------------------------------------------------

def _fmt_arg(a: Any) -> str:
    if isinstance(a, str):
        return '"' + a.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(a)


@dataclass(frozen=True)
class Atom:
    name: str
    args: tuple = ()
    phase: Phase | None = None

    def __str__(self):
        s = f"{self.name}({', '.join(_fmt_arg(a) for a in self.args)})"
        return f"{s} @ {self.phase.value}" if self.phase else s


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not:
    body: TraceProperty

    def __str__(self):
        return f"not ({self.body})"


@dataclass(frozen=True)
class And:
    left: TraceProperty
    right: TraceProperty

    def __str__(self):
        return f"({self.left}) and ({self.right})"


@dataclass(frozen=True)
class Or:
    left: TraceProperty
    right: TraceProperty

    def __str__(self):
        return f"({self.left}) or ({self.right})"


@dataclass(frozen=True)
class Implies:
    left: TraceProperty
    right: TraceProperty

    def __str__(self):
        return f"({self.left}) -> ({self.right})"


@dataclass(frozen=True)
class Always:
    body: TraceProperty

    def __str__(self):
        return f"always({self.body})"


@dataclass(frozen=True)
class Eventually:
    body: TraceProperty

    def __str__(self):
        return f"eventually({self.body})"


@dataclass(frozen=True)
class AtMostConsecutive:
    body: TraceProperty
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError("atMostConsecutive bound must be >= 1")

    def __str__(self):
        return f"atMostConsecutive({self.body}, {self.n})"


TraceProperty = Union[Atom, Const, Not, And, Or, Implies, Always, Eventually, AtMostConsecutive]
_TEMPORAL = (Always, Eventually, AtMostConsecutive)


def atoms(prop: TraceProperty) -> Iterable[Atom]:
    if isinstance(prop, Atom):
        yield prop
    elif isinstance(prop, (Not, Always, Eventually, AtMostConsecutive)):
        yield from atoms(prop.body)
    elif isinstance(prop, (And, Or, Implies)):
        yield from atoms(prop.left)
        yield from atoms(prop.right)


# -- predicates ------------------------------------------------------------------

@dataclass(frozen=True)
class PredicateContext:
    """What an atom can see: the snapshot model and, for automaton guards,
    the predicted pre-step model and every model the transition can produce."""

    model: RTM
    phase: Phase | None = None
    critical: frozenset[str] = frozenset()
    base: RTM | None = None
    outcomes: tuple[RTM, ...] = ()


Predicate = Callable[..., bool]
_PREDICATES: dict[str, Predicate] = {}


def register_predicate(name: str, fn: Predicate | None = None):
    """Register ``fn(ctx, *args) -> bool`` as an atom; usable as a decorator."""
    def deco(f: Predicate) -> Predicate:
        _PREDICATES[name] = f
        return f
    return deco(fn) if fn is not None else deco


def registered_predicates() -> tuple[str, ...]:
    return tuple(sorted(_PREDICATES))


def check_predicates(prop: TraceProperty) -> None:
    for atom in atoms(prop):
        if atom.name not in _PREDICATES:
            raise UnknownPredicateError(f"unknown predicate {atom.name!r}")


def _matches(component, name: str) -> bool:
    return name in (component.id, base_id(component.id), component.type_name)


@register_predicate("present")
def _present(ctx: PredicateContext, name: str) -> bool:
    return any(_matches(c, name) and c.lifecycle is not Lifecycle.UNDEPLOYED
               for c in ctx.model.components.values())


@register_predicate("missing")
def _missing(ctx: PredicateContext, name: str) -> bool:
    return not _present(ctx, name)


@register_predicate("violated")
def _violated(ctx: PredicateContext, name: str = "any") -> bool:
    names = None if name == "any" else [name]
    return bool(check_constraints(ctx.model, names, expected_critical=ctx.critical))


@register_predicate("valid")
def _valid(ctx: PredicateContext) -> bool:
    return not _violated(ctx, "any")


@register_predicate("annotated")
def _annotated(ctx: PredicateContext, kind: str, target: str | None = None) -> bool:
    kind = AnnotationKind(kind)
    for a in ctx.model.annotations:
        if a.kind is kind and (target is None or target in (a.target, a.get("component"))
                               or base_id(a.target) == target):
            return True
    return False


@register_predicate("lifecycle")
def _lifecycle(ctx: PredicateContext, name: str, state: str) -> bool:
    state = Lifecycle(state)
    return any(_matches(c, name) and c.lifecycle is state for c in ctx.model.components.values())


@register_predicate("metric_above")
def _metric_above(ctx: PredicateContext, element: str, metric: str, threshold: float) -> bool:
    targets = [element] if ctx.model.has_element(element) else [
        c.id for c in ctx.model.components.values() if _matches(c, element)]
    return any((ctx.model.metric(t, metric) or 0.0) > float(threshold) for t in targets)


@register_predicate("effect")
def _effect(ctx: PredicateContext) -> bool:
    return any(equal(ctx.model, o) for o in ctx.outcomes)


@register_predicate("unchanged")
def _unchanged(ctx: PredicateContext) -> bool:
    return ctx.base is not None and equal(ctx.model, ctx.base)


# -- parser ----------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<arrow>->)
  | (?P<and>&&|&)
  | (?P<or>\|\||\|)
  | (?P<bang>!)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
  | (?P<at>@)
  | (?P<colon>:)
  | (?P<semi>;)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_\-]*)
""", re.VERBOSE)

_KEYWORDS = {"and": "and", "or": "or", "not": "bang"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok_text = m.group()
        col = pos - line_start + 1
        if kind == "newline":
            tokens.append(_Tok(kind, tok_text, line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "ident" and tok_text in _KEYWORDS:
                kind = _KEYWORDS[tok_text]
            tokens.append(_Tok(kind, tok_text, line, col))
        pos = m.end()
    tokens.append(_Tok("eof", "", line, pos - line_start + 1))
    return tokens


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self) -> _Tok:
        tok = self.tokens[self.i]
        # newlines only separate properties at top level
        while tok.kind == "newline" and self.depth > 0:
            self.i += 1
            tok = self.tokens[self.i]
        return tok

    def next(self) -> _Tok:
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Tok:
        tok = self.peek()
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise ParseError(f"expected {what or kind}, found {found!r}", tok.line, tok.col)
        return self.next()

    def skip_separators(self) -> None:
        while self.tokens[self.i].kind in ("newline", "semi"):
            self.i += 1

    def file(self) -> list[tuple[str, TraceProperty]]:
        props = []
        self.skip_separators()
        while self.peek().kind != "eof":
            label = None
            if self.peek().kind == "ident" and self.tokens[self.i + 1].kind == "colon":
                label = self.next().text
                self.next()
            start = self.i
            prop = self.property()
            end = self.peek()
            if end.kind not in ("newline", "semi", "eof"):
                raise ParseError(f"unexpected {end.text!r} after property", end.line, end.col)
            text = " ".join(t.text for t in self.tokens[start:self.i] if t.kind != "newline")
            props.append((label or text, prop))
            self.skip_separators()
        return props

    def property(self) -> TraceProperty:
        left = self.disjunction()
        if self.peek().kind == "arrow":
            self.next()
            return Implies(left, self.property())
        return left

    def disjunction(self) -> TraceProperty:
        left = self.conjunction()
        while self.peek().kind == "or":
            self.next()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> TraceProperty:
        left = self.unary()
        while self.peek().kind == "and":
            self.next()
            left = And(left, self.unary())
        return left

    def unary(self) -> TraceProperty:
        if self.peek().kind == "bang":
            self.next()
            return Not(self.unary())
        return self.primary()

    def open(self) -> None:
        self.expect("lparen", "'('")
        self.depth += 1

    def close(self) -> None:
        self.expect("rparen", "')'")
        self.depth -= 1

    def primary(self) -> TraceProperty:
        tok = self.peek()
        if tok.kind == "lparen":
            self.open()
            inner = self.property()
            self.close()
            return inner
        if tok.kind != "ident":
            raise ParseError(f"expected a property, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        self.next()
        if tok.text in ("true", "false"):
            return Const(tok.text == "true")
        if tok.text in ("always", "eventually"):
            self.open()
            body = self.property()
            self.close()
            return Always(body) if tok.text == "always" else Eventually(body)
        if tok.text == "atMostConsecutive":
            self.open()
            body = self.property()
            self.expect("comma", "','")
            num = self.expect("number", "an integer bound")
            if not re.fullmatch(r"\d+", num.text) or int(num.text) < 1:
                raise ParseError("atMostConsecutive bound must be a positive integer", num.line, num.col)
            self.close()
            return AtMostConsecutive(body, int(num.text))
        return self.atom(tok)

    def atom(self, name: _Tok) -> Atom:
        self.open()
        args: list[Any] = []
        if self.peek().kind != "rparen":
            while True:
                tok = self.next()
                if tok.kind == "string":
                    args.append(_unquote(tok.text))
                elif tok.kind == "number":
                    args.append(float(tok.text) if "." in tok.text else int(tok.text))
                elif tok.kind == "ident":
                    args.append(tok.text)
                else:
                    raise ParseError(f"bad argument {tok.text!r}", tok.line, tok.col)
                if self.peek().kind != "comma":
                    break
                self.next()
        self.close()
        phase = None
        if self.peek().kind == "at":
            self.next()
            tok = self.expect("ident", "a phase name")
            try:
                phase = Phase(tok.text)
            except ValueError:
                raise ParseError(f"unknown phase {tok.text!r}", tok.line, tok.col) from None
        return Atom(name.text, tuple(args), phase)


def parse_property(text: str) -> TraceProperty:
    props = _Parser(text).file()
    if len(props) != 1:
        raise ParseError(f"expected exactly one property, found {len(props)}")
    return props[0][1]


def parse_properties(text: str) -> list[tuple[str, TraceProperty]]:
    return _Parser(text).file()


def load_properties(path) -> list[tuple[str, TraceProperty]]:
    from pathlib import Path

    return parse_properties(Path(path).read_text(encoding="utf-8"))


# -- evaluation ------------------------------------------------------------------

@dataclass(frozen=True)
class PropertyVerdict:
    """``witness`` is the inclusive (start, end) index window falsifying the property."""

    holds: bool
    witness: tuple[int, int] | None = None

    def __post_init__(self):
        if self.holds != (self.witness is None):
            raise ValueError("witness must be present exactly when the property fails")

    def to_dict(self) -> dict[str, Any]:
        return {"holds": self.holds, "witness": list(self.witness) if self.witness else None}


def _scope(prop: TraceProperty) -> frozenset[Phase] | None:
    """Phases a formula can be true at; None means every phase."""
    if isinstance(prop, Atom):
        return frozenset({prop.phase}) if prop.phase else None
    if isinstance(prop, Not):
        return _scope(prop.body)
    if isinstance(prop, (And, Or, Implies)):
        left, right = _scope(prop.left), _scope(prop.right)
        return None if left is None or right is None else left | right
    return None


class _Evaluator:
    def __init__(self, trace: Trace, critical: frozenset[str]):
        self.snaps = trace.snapshots
        self.critical = critical
        self.memo: dict[tuple[int, int], bool] = {}

    def domain(self, body: TraceProperty, i: int) -> list[int]:
        scope = _scope(body)
        return [j for j in range(i, len(self.snaps)) if scope is None or self.snaps[j].phase in scope]

    def atom(self, node: Atom, i: int) -> bool:
        if i >= len(self.snaps):
            return False
        snap = self.snaps[i]
        if node.phase is not None and snap.phase is not node.phase:
            return False
        ctx = PredicateContext(snap.model, snap.phase, self.critical)
        return bool(_PREDICATES[node.name](ctx, *node.args))

    def holds(self, node: TraceProperty, i: int) -> bool:
        key = (id(node), i)
        if key in self.memo:
            return self.memo[key]
        if isinstance(node, Atom):
            v = self.atom(node, i)
        elif isinstance(node, Const):
            v = node.value
        elif isinstance(node, Not):
            v = not self.holds(node.body, i)
        elif isinstance(node, And):
            v = self.holds(node.left, i) and self.holds(node.right, i)
        elif isinstance(node, Or):
            v = self.holds(node.left, i) or self.holds(node.right, i)
        elif isinstance(node, Implies):
            v = (not self.holds(node.left, i)) or self.holds(node.right, i)
        elif isinstance(node, Always):
            v = all(self.holds(node.body, j) for j in self.domain(node.body, i))
        elif isinstance(node, Eventually):
            v = any(self.holds(node.body, j) for j in self.domain(node.body, i))
        else:
            v = self.first_overrun(node, i) is None
        self.memo[key] = v
        return v

    def first_overrun(self, node: AtMostConsecutive, i: int) -> tuple[int, int] | None:
        run: list[int] = []
        for j in self.domain(node.body, i):
            if self.holds(node.body, j):
                run.append(j)
                if len(run) > node.n:
                    return (run[0], j)
            else:
                run = []
        return None

    def witness(self, node: TraceProperty, i: int) -> tuple[int, int]:
        """Earliest window showing why ``node`` fails at ``i``."""
        last = len(self.snaps) - 1
        if isinstance(node, Always):
            j = next(j for j in self.domain(node.body, i) if not self.holds(node.body, j))
            return (j, j)
        if isinstance(node, AtMostConsecutive):
            return self.first_overrun(node, i)
        if isinstance(node, And):
            part = node.left if not self.holds(node.left, i) else node.right
            return self.witness(part, i)
        if isinstance(node, Implies):
            return self.witness(node.right, i)
        if isinstance(node, Or):
            a, b = self.witness(node.left, i), self.witness(node.right, i)
            return (min(a[0], b[0]), max(a[1], b[1]))
        if isinstance(node, (Eventually, Not)):
            return (i, max(i, last)) if last >= i else (i, i)
        return (i, i)


def evaluate(prop: TraceProperty, trace: Trace, *, critical: Iterable[str] | None = None) -> PropertyVerdict:
    """Check ``trace`` against ``prop``.

    ``critical`` lists component ids whose absence counts as a
    ``critical-components-present`` violation; by default the critical
    components of the first snapshot are used.
    """
    check_predicates(prop)
    if critical is None:
        critical = critical_ids(trace.snapshots[0].model) if trace.snapshots else frozenset()
    ev = _Evaluator(trace, frozenset(critical))
    if ev.holds(prop, 0):
        return PropertyVerdict(True)
    return PropertyVerdict(False, ev.witness(prop, 0))


def evaluate_state(prop: TraceProperty, ctx: PredicateContext) -> bool:
    """Evaluate a temporal-operator-free formula in a single context (automaton guards)."""
    if isinstance(prop, Atom):
        if prop.phase is not None and ctx.phase is not prop.phase:
            return False
        return bool(_PREDICATES[prop.name](ctx, *prop.args))
    if isinstance(prop, Const):
        return prop.value
    if isinstance(prop, Not):
        return not evaluate_state(prop.body, ctx)
    if isinstance(prop, And):
        return evaluate_state(prop.left, ctx) and evaluate_state(prop.right, ctx)
    if isinstance(prop, Or):
        return evaluate_state(prop.left, ctx) or evaluate_state(prop.right, ctx)
    if isinstance(prop, Implies):
        return (not evaluate_state(prop.left, ctx)) or evaluate_state(prop.right, ctx)
    raise InvalidArgumentError(f"temporal operator not allowed here: {prop}")


def is_grey_box(prop: TraceProperty) -> bool:
    """Grey-box properties mention analyzed snapshots."""
    return any(a.phase is Phase.ANALYZED for a in atoms(prop))


def evaluate_on_campaign(prop: TraceProperty, trace: Trace, *, critical: Iterable[str] | None = None) -> PropertyVerdict:
    """Black-box properties see the trace without analyzed snapshots, grey-box ones the full trace.

    The witness window always indexes the full trace.
    """
    if is_grey_box(prop):
        return evaluate(prop, trace, critical=critical)
    kept = [i for i, s in enumerate(trace.snapshots) if s.phase is not Phase.ANALYZED]
    verdict = evaluate(prop, project(trace, (Phase.MONITORED, Phase.PLANNED)), critical=critical)
    if verdict.holds or not kept:
        return verdict
    start, end = (kept[min(i, len(kept) - 1)] for i in verdict.witness)
    return PropertyVerdict(False, (start, end))


def temporal_free(prop: TraceProperty) -> bool:
    if isinstance(prop, _TEMPORAL):
        return False
    if isinstance(prop, Not):
        return temporal_free(prop.body)
    if isinstance(prop, (And, Or, Implies)):
        return temporal_free(prop.left) and temporal_free(prop.right)
    return True


__all__ += ["atoms", "temporal_free", "registered_constraints"]
