"""Type checking for the bool/int Lustre subset.

:func:`typecheck` returns a copy of the program in which every expression
carries its type in ``.ty``: ``"bool"``, ``"int"``, or a tuple of those for
multi-output node calls and tuple literals.
"""

from __future__ import annotations

from dataclasses import replace
from graphlib import CycleError, TopologicalSorter

from lustrehorn.frontend.ast import (
    BOOL, INT, Arrow, BinOp, BoolLit, Call, Equation, Expr, IntLit, Ite, Node, Pre,
    Program, TupleExpr, UnOp, VarRef, calls_in,
)
from lustrehorn.frontend.diagnostics import Diagnostic, TypeCheckError, at

TypedProgram = Program

_BOOL_BIN = {"and", "or", "xor", "=>"}
_ARITH = {"+", "-", "*"}
_ORDER = {"<", "<=", ">", ">="}
_EQUALITY = {"=", "<>"}


def _show(t) -> str:
    if isinstance(t, tuple):
        return "(" + ", ".join(t) + ")"
    return str(t)


class _Checker:
    def __init__(self, program: Program):
        self.program = program
        self.nodes = program.node_map
        self.diags: list[Diagnostic] = []

    def err(self, pos, code, msg):
        self.diags.append(at(pos, code, msg))

    def signature(self, name):
        n = self.nodes[name]
        return tuple(d.ty for d in n.inputs), tuple(d.ty for d in n.outputs)

    # Returns the typed expression; on error the type is None.
    def expr(self, e: Expr, env: dict[str, str], *, allow_tuple=False) -> Expr:
        if isinstance(e, BoolLit):
            return replace(e, ty=BOOL)
        if isinstance(e, IntLit):
            return replace(e, ty=INT)
        if isinstance(e, VarRef):
            if e.name not in env:
                self.err(e.pos, "E-UNDEF", f"undefined variable {e.name!r}")
                return e
            return replace(e, ty=env[e.name])
        if isinstance(e, UnOp):
            arg = self.expr(e.arg, env)
            want = BOOL if e.op == "not" else INT
            if arg.ty is not None and arg.ty != want:
                self.err(e.pos, "E-TYPE", f"operator {e.op!r} expects {want}, got {_show(arg.ty)}")
            return replace(e, arg=arg, ty=want)
        if isinstance(e, BinOp):
            left, right = self.expr(e.left, env), self.expr(e.right, env)
            lt, rt = left.ty, right.ty
            if e.op in _BOOL_BIN or e.op in _ARITH or e.op in _ORDER:
                want = BOOL if e.op in _BOOL_BIN else INT
                for side in (lt, rt):
                    if side is not None and side != want:
                        self.err(e.pos, "E-TYPE", f"operator {e.op!r} expects {want} operands, got {_show(side)}")
                ty = INT if e.op in _ARITH else BOOL
            else:
                if lt is not None and rt is not None and lt != rt:
                    self.err(e.pos, "E-TYPE", f"cannot compare {_show(lt)} with {_show(rt)}")
                for side in (lt, rt):
                    if isinstance(side, tuple):
                        self.err(e.pos, "E-TYPE", "tuples cannot be compared")
                ty = BOOL
            return replace(e, left=left, right=right, ty=ty)
        if isinstance(e, Ite):
            c = self.expr(e.cond, env)
            a = self.expr(e.then, env)
            b = self.expr(e.else_, env)
            if c.ty is not None and c.ty != BOOL:
                self.err(e.pos, "E-TYPE", f"if-condition must be bool, got {_show(c.ty)}")
            if a.ty is not None and b.ty is not None and a.ty != b.ty:
                self.err(e.pos, "E-TYPE", f"if-branches differ: {_show(a.ty)} vs {_show(b.ty)}")
            if isinstance(a.ty, tuple) or isinstance(b.ty, tuple):
                self.err(e.pos, "E-TUPLE", "tuple-valued conditionals are not supported")
            return replace(e, cond=c, then=a, else_=b, ty=a.ty if a.ty is not None else b.ty)
        if isinstance(e, Pre):
            arg = self.expr(e.arg, env)
            if isinstance(arg.ty, tuple):
                self.err(e.pos, "E-TUPLE", "pre of a tuple is not supported")
            return replace(e, arg=arg, ty=arg.ty)
        if isinstance(e, Arrow):
            a = self.expr(e.init, env)
            b = self.expr(e.step, env)
            if a.ty is not None and b.ty is not None and a.ty != b.ty:
                self.err(e.pos, "E-TYPE", f"'->' operands differ: {_show(a.ty)} vs {_show(b.ty)}")
            if isinstance(a.ty, tuple) or isinstance(b.ty, tuple):
                self.err(e.pos, "E-TUPLE", "'->' over tuples is not supported")
            return replace(e, init=a, step=b, ty=a.ty if a.ty is not None else b.ty)
        if isinstance(e, Call):
            args = tuple(self.expr(a, env) for a in e.args)
            if e.node not in self.nodes:
                self.err(e.pos, "E-UNDEF", f"call to undefined node {e.node!r}")
                return replace(e, args=args)
            ins, outs = self.signature(e.node)
            if len(args) != len(ins):
                self.err(e.pos, "E-ARITY", f"node {e.node!r} expects {len(ins)} arguments, got {len(args)}")
            else:
                for k, (a, want) in enumerate(zip(args, ins), 1):
                    if a.ty is not None and a.ty != want:
                        self.err(a.pos or e.pos, "E-TYPE", f"argument {k} of {e.node!r} must be {want}, got {_show(a.ty)}")
            ty = outs[0] if len(outs) == 1 else outs
            if isinstance(ty, tuple) and not allow_tuple:
                self.err(e.pos, "E-TUPLE", f"node {e.node!r} returns {len(outs)} values; use it as a tuple equation right-hand side")
            return replace(e, args=args, ty=ty)
        if isinstance(e, TupleExpr):
            if not allow_tuple:
                self.err(e.pos, "E-TUPLE", "tuple expressions are only allowed as equation right-hand sides")
            items = tuple(self.expr(x, env) for x in e.items)
            for x in items:
                if isinstance(x.ty, tuple):
                    self.err(x.pos or e.pos, "E-TUPLE", "nested tuples are not supported")
            return replace(e, items=items, ty=tuple(x.ty for x in items))
        raise TypeError(e)

    def node(self, n: Node) -> Node:
        env: dict[str, str] = {}
        for d in n.decls:
            if d.name in env:
                self.err(d.pos, "E-DUPVAR", f"variable {d.name!r} declared twice in node {n.name!r}")
            env[d.name] = d.ty
        inputs = {d.name for d in n.inputs}
        defined: dict[str, Equation] = {}
        eqs = []
        for eq in n.equations:
            if len(set(eq.lhs)) != len(eq.lhs):
                self.err(eq.pos, "E-DUPDEF", f"repeated variable in left-hand side {', '.join(eq.lhs)}")
            for v in eq.lhs:
                if v in inputs:
                    self.err(eq.pos, "E-DEFINPUT", f"input {v!r} cannot be defined by an equation")
                elif v not in env:
                    self.err(eq.pos, "E-UNDEF", f"undefined variable {v!r}")
                elif v in defined:
                    self.err(eq.pos, "E-DUPDEF", f"variable {v!r} is defined twice (single assignment)")
                defined.setdefault(v, eq)
            rhs = self.expr(eq.rhs, env, allow_tuple=len(eq.lhs) > 1)
            want = tuple(env.get(v) for v in eq.lhs)
            want = want[0] if len(want) == 1 else want
            if rhs.ty is not None and None not in (want if isinstance(want, tuple) else (want,)):
                if rhs.ty != want:
                    self.err(eq.pos, "E-TYPE", f"equation for {', '.join(eq.lhs)}: expected {_show(want)}, got {_show(rhs.ty)}")
            eqs.append(replace(eq, rhs=rhs))
        for d in n.outputs + n.locals:
            if d.name not in defined:
                self.err(d.pos or n.pos, "E-NODEF", f"{d.name!r} in node {n.name!r} has no defining equation")
        props = []
        for p in n.properties:
            tp = self.expr(p, env)
            if tp.ty is not None and tp.ty != BOOL:
                self.err(p.pos, "E-TYPE", f"property must be bool, got {_show(tp.ty)}")
            props.append(tp)
        return replace(n, equations=tuple(eqs), properties=tuple(props))

    def check_call_graph(self):
        graph = {}
        for n in self.program.nodes:
            callees = set()
            for eq in n.equations:
                callees.update(c.node for c in calls_in(eq.rhs) if c.node in self.nodes)
            graph[n.name] = callees
        try:
            tuple(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            cycle = exc.args[1]
            self.err(self.nodes[cycle[0]].pos, "E-RECURSION",
                     "recursive node definitions: " + " -> ".join(reversed(cycle)))


def typecheck(p: Program) -> TypedProgram:
    """Return ``p`` with every expression annotated; raise on any error."""
    chk = _Checker(p)
    chk.check_call_graph()
    nodes = tuple(chk.node(n) for n in p.nodes)
    if chk.diags:
        raise TypeCheckError(chk.diags)
    return replace(p, nodes=nodes)


def call_order(p: Program) -> list[str]:
    """Node names with every callee before its callers."""
    graph = {n.name: {c.node for eq in n.equations for c in calls_in(eq.rhs)} for n in p.nodes}
    return list(TopologicalSorter(graph).static_order())
