"""Extraction of stateful sub-expressions and init/step projection.

After normalization every ``pre`` sits in an equation ``x = pre e`` with ``e``
stateless, every node call sits in an equation ``v1, ..., vn = f(e1, ..., em)``
with stateless arguments, and the ``->`` operator only appears at the top of a
right-hand side, where :func:`project_rho` splits it into the initial-instant
and later-instant forms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from lustrehorn.frontend.ast import (
    Arrow, BinOp, Call, Equation, Expr, Ite, Node, Pre, Program, TupleExpr, UnOp,
    VarDecl, VarRef, children, is_stateless, subexprs,
)
from lustrehorn.frontend.diagnostics import NormalizationError, at


@dataclass(frozen=True)
class SimpleDef:
    var: str
    expr: Expr

    @property
    def defines(self) -> tuple[str, ...]:
        return (self.var,)


@dataclass(frozen=True)
class MemDef:
    """``var = pre expr``."""

    var: str
    expr: Expr

    @property
    def defines(self) -> tuple[str, ...]:
        return (self.var,)


@dataclass(frozen=True)
class CallDef:
    vars: tuple[str, ...]
    callee: str
    uid: int
    args: tuple[Expr, ...]

    @property
    def defines(self) -> tuple[str, ...]:
        return self.vars


NormEquation = Union[SimpleDef, MemDef, CallDef]


@dataclass(frozen=True)
class NormalizedNode:
    name: str
    inputs: tuple[VarDecl, ...]
    outputs: tuple[VarDecl, ...]
    locals: tuple[VarDecl, ...]
    new_vars: tuple[str, ...]
    init_eqs: tuple[NormEquation, ...]
    trans_eqs: tuple[NormEquation, ...]
    properties: tuple[Expr, ...] = ()

    @property
    def decls(self) -> tuple[VarDecl, ...]:
        return self.inputs + self.outputs + self.locals

    @property
    def var_types(self) -> dict[str, str]:
        return {d.name: d.ty for d in self.decls}


@dataclass(frozen=True)
class NormalizedProgram:
    nodes: tuple[NormalizedNode, ...]
    main: str

    @property
    def node_map(self) -> dict[str, NormalizedNode]:
        return {n.name: n for n in self.nodes}

    def node(self, name: str) -> NormalizedNode:
        return self.node_map[name]

    @property
    def top(self) -> NormalizedNode:
        return self.node(self.main)


class UidAllocator:
    def __init__(self, start: int = 1):
        self._it = itertools.count(start)

    def __call__(self) -> int:
        return next(self._it)


@dataclass
class _Context:
    """Per-node state: fresh-name counters, ``pre`` sharing, uid source."""

    types: dict[str, str]
    outputs: frozenset[str] = frozenset()
    callee_outputs: dict[str, tuple[str, ...]] = field(default_factory=dict)
    uids: UidAllocator = field(default_factory=UidAllocator)
    shared_pre: dict[Expr, str] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)

    def fresh(self, base: str, vars: set[str]) -> str:
        while True:
            k = self.counters.get(base, 0) + 1
            self.counters[base] = k
            name = f"p{k}_{base}"
            if name not in vars:
                return name

    def fresh_res(self, callee: str, uid: int, vars: set[str]) -> str:
        name = f"res_{callee}{uid}"
        k = 1
        while name in vars:
            k += 1
            name = f"res_{callee}{uid}_{k}"
        return name


def _rebuild(e: Expr, kids: list[Expr]) -> Expr:
    if isinstance(e, UnOp):
        return replace(e, arg=kids[0])
    if isinstance(e, BinOp):
        return replace(e, left=kids[0], right=kids[1])
    if isinstance(e, Ite):
        return replace(e, cond=kids[0], then=kids[1], else_=kids[2])
    if isinstance(e, Arrow):
        return replace(e, init=kids[0], step=kids[1])
    if isinstance(e, TupleExpr):
        return replace(e, items=tuple(kids))
    if isinstance(e, Pre):
        return replace(e, arg=kids[0])
    if isinstance(e, Call):
        return replace(e, args=tuple(kids))
    return e


def normalize_expr(e: Expr, eqs=(), vars=(), ctx: _Context | None = None):
    """Return ``(e', eqs', vars')`` with ``e'`` free of ``pre`` and node calls.

    Arguments are processed left to right and innermost first; each extracted
    ``pre``/call is bound to a fresh variable and its equation appended.
    Syntactically identical ``pre`` expressions share one variable.
    """
    eqs = list(eqs)
    vars = set(vars)
    if ctx is None:
        ctx = _Context(types={})
    out = _norm_expr(e, eqs, vars, ctx)
    return out, eqs, vars


def _norm_expr(e: Expr, eqs: list, vars: set, ctx: _Context) -> Expr:
    if isinstance(e, Pre):
        arg = _norm_expr(e.arg, eqs, vars, ctx)
        if arg in ctx.shared_pre:
            return VarRef(ctx.shared_pre[arg], e.pos, e.ty)
        base = arg.name if isinstance(arg, VarRef) else "expr"
        x = ctx.fresh(base, vars)
        ctx.shared_pre[arg] = x
        ctx.types[x] = e.ty
        eqs.append(MemDef(x, arg))
        vars.add(x)
        return VarRef(x, e.pos, e.ty)
    if isinstance(e, Call):
        args = tuple(_norm_expr(a, eqs, vars, ctx) for a in e.args)
        uid = ctx.uids()
        x = ctx.fresh_res(e.node, uid, vars)
        ctx.types[x] = e.ty
        eqs.append(CallDef((x,), e.node, uid, args))
        vars.add(x)
        return VarRef(x, e.pos, e.ty)
    kids = children(e)
    if not kids:
        return e
    return _rebuild(e, [_norm_expr(k, eqs, vars, ctx) for k in kids])


def _check_arrows(rhs: Expr, where) -> None:
    """Only a single top-level ``->`` with arrow-free operands is accepted."""
    top = [rhs.init, rhs.step] if isinstance(rhs, Arrow) else [rhs]
    for part in top:
        for sub in subexprs(part):
            if isinstance(sub, Arrow):
                raise NormalizationError(
                    [at(sub.pos or where, "E-ARROW",
                        "'->' is only supported at the top of an equation right-hand side")]
                )


def normalize_eq(eq: Equation, eqs=(), vars=(), ctx: _Context | None = None):
    """Normalize one equation; returns ``(eqs', vars')``."""
    eqs = list(eqs)
    vars = set(vars)
    if ctx is None:
        ctx = _Context(types={})
    _norm_eq(eq, eqs, vars, ctx)
    return eqs, vars


def _norm_eq(eq: Equation, eqs: list, vars: set, ctx: _Context) -> None:
    rhs = eq.rhs
    if len(eq.lhs) > 1:
        if isinstance(rhs, TupleExpr):
            for v, item in zip(eq.lhs, rhs.items):
                _norm_eq(Equation((v,), item, eq.pos), eqs, vars, ctx)
            return
        if isinstance(rhs, Call):
            _norm_call(eq.lhs, rhs, eqs, vars, ctx)
            return
        raise NormalizationError(
            [at(eq.pos, "E-TUPLE", "a tuple definition needs a tuple literal or a node call on the right")]
        )
    (v,) = eq.lhs
    if isinstance(rhs, Call):
        _norm_call((v,), rhs, eqs, vars, ctx)
        return
    if isinstance(rhs, Pre) and v not in ctx.outputs:
        arg = _norm_expr(rhs.arg, eqs, vars, ctx)
        _check_arrows(arg, eq.pos)
        if isinstance(arg, Arrow):
            raise NormalizationError([at(eq.pos, "E-ARROW", "'->' under 'pre' is not supported")])
        ctx.shared_pre.setdefault(arg, v)
        eqs.append(MemDef(v, arg))
        return
    new = _norm_expr(rhs, eqs, vars, ctx)
    _check_arrows(new, eq.pos)
    eqs.append(SimpleDef(v, new))


def _norm_call(lhs, call: Call, eqs, vars, ctx) -> None:
    args = tuple(_norm_expr(a, eqs, vars, ctx) for a in call.args)
    for a in args:
        if not is_stateless(a):
            raise NormalizationError([at(call.pos, "E-ARROW", "'->' inside node-call arguments is not supported")])
    eqs.append(CallDef(tuple(lhs), call.node, ctx.uids(), args))


def project_rho(eq: NormEquation) -> tuple[NormEquation, NormEquation]:
    """Split ``v = a -> b`` into ``(v = a, v = b)``; other equations are kept."""
    if isinstance(eq, SimpleDef) and isinstance(eq.expr, Arrow):
        return SimpleDef(eq.var, eq.expr.init), SimpleDef(eq.var, eq.expr.step)
    for sub in _exprs_of(eq):
        if any(isinstance(x, Arrow) for x in subexprs(sub)):
            raise NormalizationError([at(sub.pos, "E-ARROW", "nested '->' cannot be projected")])
    return eq, eq


def _exprs_of(eq: NormEquation) -> Iterable[Expr]:
    if isinstance(eq, CallDef):
        return eq.args
    return (eq.expr,)


def _memory_order(n: Node, eqs: list[NormEquation]) -> list[MemDef]:
    """Memories ordered by the declaration order of the stream they delay."""
    index = {d.name: i for i, d in enumerate(n.decls)}
    mems = [(k, e) for k, e in enumerate(eqs) if isinstance(e, MemDef)]

    def key(item):
        k, m = item
        if isinstance(m.expr, VarRef) and m.expr.name in index:
            return (0, index[m.expr.name], k)
        return (1, 0, k)

    return [m for _, m in sorted(mems, key=key)]


def normalize_node(
    n: Node,
    uids: UidAllocator | None = None,
    callee_outputs: dict[str, tuple[str, ...]] | None = None,
) -> NormalizedNode:
    ctx = _Context(
        types=dict(n.var_types),
        outputs=frozenset(d.name for d in n.outputs),
        callee_outputs=callee_outputs or {},
        uids=uids or UidAllocator(),
    )
    init_vars = {d.name for d in n.decls}
    eqs: list[NormEquation] = []
    vars = set(init_vars)
    for eq in n.equations:
        _norm_eq(eq, eqs, vars, ctx)
    mems = _memory_order(n, eqs)
    eqs = [e for e in eqs if not isinstance(e, MemDef)] + mems
    projected = [project_rho(e) for e in eqs]
    new_vars = tuple(v for e in eqs for v in e.defines if v not in init_vars)
    new_decls = tuple(VarDecl(v, ctx.types[v]) for v in new_vars)
    for p in n.properties:
        if not is_stateless(p):
            raise NormalizationError(
                [at(p.pos, "E-PROPERTY", "properties must be stateless; define an observer output instead")]
            )
    return NormalizedNode(
        name=n.name,
        inputs=n.inputs,
        outputs=n.outputs,
        locals=n.locals + new_decls,
        new_vars=new_vars,
        init_eqs=tuple(i for i, _ in projected),
        trans_eqs=tuple(t for _, t in projected),
        properties=n.properties,
    )


def normalize_program(p: Program) -> NormalizedProgram:
    """Normalize every node; call uids are unique across the whole program."""
    uids = UidAllocator()
    outs = {n.name: tuple(d.ty for d in n.outputs) for n in p.nodes}
    return NormalizedProgram(tuple(normalize_node(n, uids, outs) for n in p.nodes), p.main)


def denormalize_node(nn: NormalizedNode) -> Node:
    """Rebuild a source-level node whose equations mirror ``nn`` one-to-one."""
    eqs = []
    for init, trans in zip(nn.init_eqs, nn.trans_eqs):
        if isinstance(trans, SimpleDef):
            rhs = trans.expr if init == trans else Arrow(init.expr, trans.expr)
            eqs.append(Equation((trans.var,), rhs))
        elif isinstance(trans, MemDef):
            eqs.append(Equation((trans.var,), Pre(trans.expr)))
        else:
            eqs.append(Equation(trans.vars, Call(trans.callee, trans.args)))
    return Node(nn.name, nn.inputs, nn.outputs, nn.locals, tuple(eqs), nn.properties)


def denormalize(np_: NormalizedProgram) -> Program:
    return Program(tuple(denormalize_node(n) for n in np_.nodes), np_.main)
