"""First-order terms over Booleans and linear integer arithmetic.

These are the formulas that appear in Horn rule bodies, in solver models and
in validity queries. Relation symbols (declared or macro-defined) appear as
:class:`App` nodes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Union

from lustrehorn.sexp import Quoted, SExpError

BOOL = "Bool"
INT = "Int"
SORTS = (BOOL, INT)

Term = Union["Var", "Const", "Op", "App"]


@dataclass(frozen=True)
class Var:
    name: str
    sort: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: bool | int
    sort: str

    def __repr__(self):
        return to_smt(self)


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple

    def __repr__(self):
        return to_smt(self)


@dataclass(frozen=True)
class App:
    """Application of a relation symbol or a defined predicate."""

    rel: str
    args: tuple

    def __repr__(self):
        return to_smt(self)


TRUE = Const(True, BOOL)
FALSE = Const(False, BOOL)


def int_const(n: int) -> Const:
    return Const(int(n), INT)


def bool_const(b: bool) -> Const:
    return TRUE if b else FALSE


# Operators and their result sorts. None means "sort of the second argument"
# (ite) or "sort of the argument" (unary minus handled as Int).
_BOOL_OPS = {"not", "and", "or", "=>", "xor", "=", "distinct", "<", "<=", ">", ">="}
_INT_OPS = {"+", "-", "*"}
OPERATORS = _BOOL_OPS | _INT_OPS | {"ite"}


def sort_of(t: Term) -> str:
    if isinstance(t, (Var, Const)):
        return t.sort
    if isinstance(t, App):
        return BOOL
    if t.op in _BOOL_OPS:
        return BOOL
    if t.op in _INT_OPS:
        return INT
    return sort_of(t.args[1])


# ---------------------------------------------------------------------------
# smart constructors (light simplification only; keep formulas recognisable)


def and_(*args: Term) -> Term:
    flat: list[Term] = []
    for a in args:
        if isinstance(a, Op) and a.op == "and":
            flat.extend(a.args)
        elif a == TRUE:
            continue
        elif a == FALSE:
            return FALSE
        else:
            flat.append(a)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return Op("and", tuple(flat))


def or_(*args: Term) -> Term:
    flat: list[Term] = []
    for a in args:
        if isinstance(a, Op) and a.op == "or":
            flat.extend(a.args)
        elif a == FALSE:
            continue
        elif a == TRUE:
            return TRUE
        else:
            flat.append(a)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Op("or", tuple(flat))


def not_(a: Term) -> Term:
    if a == TRUE:
        return FALSE
    if a == FALSE:
        return TRUE
    if isinstance(a, Op) and a.op == "not":
        return a.args[0]
    return Op("not", (a,))


def implies(a: Term, b: Term) -> Term:
    return Op("=>", (a, b))


def eq(a: Term, b: Term) -> Term:
    return Op("=", (a, b))


def ite(c: Term, a: Term, b: Term) -> Term:
    return Op("ite", (c, a, b))


def op(name: str, *args: Term) -> Term:
    if name == "and":
        return and_(*args)
    if name == "or":
        return or_(*args)
    if name == "not":
        return not_(*args)
    return Op(name, tuple(args))


def conjuncts(t: Term) -> list[Term]:
    if isinstance(t, Op) and t.op == "and":
        return list(t.args)
    if t == TRUE:
        return []
    return [t]


# ---------------------------------------------------------------------------
# traversal


def walk(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, (Op, App)):
            stack.extend(reversed(cur.args))


def free_vars(*terms: Term) -> dict[str, str]:
    """Variables of ``terms`` (name -> sort) in first-occurrence order."""
    out: dict[str, str] = {}
    for t in terms:
        for sub in walk(t):
            if isinstance(sub, Var) and sub.name not in out:
                out[sub.name] = sub.sort
    return out


def apps(t: Term) -> Iterator[App]:
    for sub in walk(t):
        if isinstance(sub, App):
            yield sub


def transform(t: Term, fn: Callable[[Term], Term | None]) -> Term:
    """Bottom-up rewrite; ``fn`` returns a replacement or None to keep."""
    if isinstance(t, Op):
        args = tuple(transform(a, fn) for a in t.args)
        if args != t.args:
            t = op(t.op, *args) if t.op in ("and", "or", "not") else Op(t.op, args)
    elif isinstance(t, App):
        args = tuple(transform(a, fn) for a in t.args)
        if args != t.args:
            t = App(t.rel, args)
    new = fn(t)
    return t if new is None else new


def substitute(t: Term, mapping: Mapping[str, Term]) -> Term:
    if not mapping:
        return t
    return transform(t, lambda s: mapping.get(s.name) if isinstance(s, Var) else None)


def rename(t: Term, mapping: Mapping[str, str]) -> Term:
    return transform(
        t,
        lambda s: Var(mapping[s.name], s.sort) if isinstance(s, Var) and s.name in mapping else None,
    )


def expand_apps(t: Term, interp: Callable[[App], Term | None]) -> Term:
    """Replace relation applications by ``interp(app)`` when it is not None."""
    return transform(t, lambda s: interp(s) if isinstance(s, App) else None)


# ---------------------------------------------------------------------------
# SMT-LIB rendering

_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/\-][A-Za-z0-9~!@$%^&*_+=<>.?/\-]*$")
_RESERVED = {
    "let", "forall", "exists", "match", "par", "_", "!", "as",
    "true", "false", "and", "or", "not", "ite", "=>", "distinct",
}


def symbol(name: str) -> str:
    if _SIMPLE_SYMBOL.match(name) and name not in _RESERVED:
        return name
    return f"|{name}|"


def to_smt(t: Term) -> str:
    if isinstance(t, Var):
        return symbol(t.name)
    if isinstance(t, Const):
        if t.sort == BOOL:
            return "true" if t.value else "false"
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    if isinstance(t, App):
        if not t.args:
            return symbol(t.rel)
        return "(" + symbol(t.rel) + " " + " ".join(to_smt(a) for a in t.args) + ")"
    return "(" + t.op + " " + " ".join(to_smt(a) for a in t.args) + ")"


def sorted_binders(vs: Mapping[str, str]) -> str:
    return " ".join(f"({symbol(n)} {s})" for n, s in vs.items())


# ---------------------------------------------------------------------------
# reading terms back from s-expressions


class TermSyntaxError(SExpError):
    pass


def from_sexp(
    sx,
    scope: Mapping[str, Term],
    relations: Mapping[str, int] | None = None,
    definitions: Mapping[str, "Definition"] | None = None,
) -> Term:
    """Convert an s-expression to a term.

    ``scope`` maps symbols to terms (bound variables, let-bindings).
    ``let`` is expanded, ``!`` annotations are dropped. ``relations`` lists
    symbols to keep as :class:`App`; ``definitions`` are expanded inline.
    """
    relations = relations or {}
    definitions = definitions or {}

    def conv(x, env):
        if isinstance(x, list):
            if not x:
                raise TermSyntaxError("empty application")
            head = x[0]
            if head == "let" and not isinstance(head, Quoted):
                new_env = dict(env)
                for binding in x[1]:
                    name, value = binding
                    new_env[str(name)] = conv(value, env)
                return conv(x[2], new_env)
            if head == "!":
                return conv(x[1], env)
            if isinstance(head, list):
                raise TermSyntaxError(f"unsupported indexed operator {head!r}")
            args = [conv(a, env) for a in x[1:]]
            name = str(head)
            if name in definitions:
                return definitions[name].apply(args)
            if name in relations:
                return App(name, tuple(args))
            if name == "-" and len(args) == 1:
                a = args[0]
                if isinstance(a, Const):
                    return int_const(-a.value)
                return Op("-", (a,))
            if name not in OPERATORS:
                raise TermSyntaxError(f"unknown operator {name!r}")
            if name in ("and", "or", "not"):
                return op(name, *args)
            return Op(name, tuple(args))
        name = str(x)
        if name in env:
            return env[name]
        if name == "true" and not isinstance(x, Quoted):
            return TRUE
        if name == "false" and not isinstance(x, Quoted):
            return FALSE
        if re.fullmatch(r"\d+", name):
            return int_const(int(name))
        if name in definitions:
            return definitions[name].apply([])
        if name in relations:
            return App(name, ())
        raise TermSyntaxError(f"unbound symbol {name!r}")

    return conv(sx, dict(scope))


@dataclass(frozen=True)
class Definition:
    """A macro predicate ``name(params) := body`` (SMT-LIB ``define-fun``)."""

    name: str
    params: tuple[Var, ...]
    body: Term

    def apply(self, args: Iterable[Term]) -> Term:
        args = list(args)
        if len(args) != len(self.params):
            raise TermSyntaxError(
                f"{self.name} expects {len(self.params)} arguments, got {len(args)}"
            )
        return substitute(self.body, {p.name: a for p, a in zip(self.params, args)})

    @property
    def sorts(self) -> tuple[str, ...]:
        return tuple(p.sort for p in self.params)

    def to_smt(self) -> str:
        binders = " ".join(f"({symbol(p.name)} {p.sort})" for p in self.params)
        return f"(define-fun {symbol(self.name)} ({binders}) Bool {to_smt(self.body)})"


def definition_from_sexp(sx, relations=None, definitions=None) -> Definition:
    """Read ``(define-fun name ((x S) ...) Bool body)``."""
    if not (isinstance(sx, list) and len(sx) == 5 and sx[0] == "define-fun"):
        raise TermSyntaxError("expected (define-fun name params Bool body)")
    _, name, binders, ret, body = sx
    if ret != BOOL:
        raise TermSyntaxError(f"define-fun {name}: only Bool-valued definitions are supported")
    params = []
    for b in binders:
        if not (isinstance(b, list) and len(b) == 2 and b[1] in SORTS):
            raise TermSyntaxError(f"define-fun {name}: bad parameter {b!r}")
        params.append(Var(str(b[0]), str(b[1])))
    scope = {p.name: p for p in params}
    return Definition(str(name), tuple(params), from_sexp(body, scope, relations, definitions))
