"""Abstract syntax for the supported Lustre subset.

Source positions and inferred types are carried on every node but excluded
from equality, so two parses of the same program compare equal regardless of
layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

BOOL = "bool"
INT = "int"


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


def _pos():
    return field(default=None, compare=False, repr=False)


def _ty():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class VarRef:
    name: str
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class UnOp:
    op: str  # "not" | "-"
    arg: "Expr"
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class BinOp:
    op: str  # and or xor => = <> < <= > >= + - *
    left: "Expr"
    right: "Expr"
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class Ite:
    cond: "Expr"
    then: "Expr"
    else_: "Expr"
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class Pre:
    arg: "Expr"
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class Arrow:
    init: "Expr"
    step: "Expr"
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class Call:
    node: str
    args: tuple["Expr", ...]
    pos: Pos | None = _pos()
    ty: object = _ty()


@dataclass(frozen=True)
class TupleExpr:
    items: tuple["Expr", ...]
    pos: Pos | None = _pos()
    ty: object = _ty()


Expr = Union[BoolLit, IntLit, VarRef, UnOp, BinOp, Ite, Pre, Arrow, Call, TupleExpr]


@dataclass(frozen=True)
class VarDecl:
    name: str
    ty: str
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Equation:
    lhs: tuple[str, ...]
    rhs: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Node:
    name: str
    inputs: tuple[VarDecl, ...]
    outputs: tuple[VarDecl, ...]
    locals: tuple[VarDecl, ...]
    equations: tuple[Equation, ...]
    properties: tuple[Expr, ...] = ()
    pos: Pos | None = _pos()

    @property
    def decls(self) -> tuple[VarDecl, ...]:
        return self.inputs + self.outputs + self.locals

    @property
    def var_types(self) -> dict[str, str]:
        return {d.name: d.ty for d in self.decls}

    def definition_of(self, var: str) -> Equation | None:
        for eq in self.equations:
            if var in eq.lhs:
                return eq
        return None


@dataclass(frozen=True)
class Program:
    nodes: tuple[Node, ...]
    main: str

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def node_map(self) -> dict[str, Node]:
        return {n.name: n for n in self.nodes}

    @property
    def top(self) -> Node:
        return self.node(self.main)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, UnOp):
        return (e.arg,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Ite):
        return (e.cond, e.then, e.else_)
    if isinstance(e, Pre):
        return (e.arg,)
    if isinstance(e, Arrow):
        return (e.init, e.step)
    if isinstance(e, (Call, TupleExpr)):
        return e.args if isinstance(e, Call) else e.items
    return ()


def subexprs(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal, left to right."""
    yield e
    for c in children(e):
        yield from subexprs(c)


def calls_in(e: Expr) -> Iterator[Call]:
    return (x for x in subexprs(e) if isinstance(x, Call))


def is_stateless(e: Expr) -> bool:
    return not any(isinstance(x, (Pre, Arrow, Call)) for x in subexprs(e))


def vars_read(e: Expr, *, under_pre: bool = True) -> list[str]:
    """Variables referenced by ``e``; with ``under_pre=False`` skip pre bodies."""
    out: list[str] = []

    def go(x):
        if isinstance(x, VarRef):
            if x.name not in out:
                out.append(x.name)
            return
        if isinstance(x, Pre) and not under_pre:
            return
        for c in children(x):
            go(c)

    go(e)
    return out
