"""Concrete-syntax printer. Output re-parses to an equal AST."""

from __future__ import annotations

from lustrehorn.frontend.ast import (
    Arrow, BinOp, BoolLit, Call, Equation, Expr, IntLit, Ite, Node, Pre, Program,
    TupleExpr, UnOp, VarDecl, VarRef,
)


def print_expr(e: Expr) -> str:
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, IntLit):
        return str(e.value) if e.value >= 0 else f"(-{-e.value})"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, UnOp):
        return f"({e.op} {print_expr(e.arg)})"
    if isinstance(e, BinOp):
        return f"({print_expr(e.left)} {e.op} {print_expr(e.right)})"
    if isinstance(e, Ite):
        return f"(if {print_expr(e.cond)} then {print_expr(e.then)} else {print_expr(e.else_)})"
    if isinstance(e, Pre):
        return f"(pre {print_expr(e.arg)})"
    if isinstance(e, Arrow):
        return f"({print_expr(e.init)} -> {print_expr(e.step)})"
    if isinstance(e, Call):
        return f"{e.node}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, TupleExpr):
        return f"({', '.join(print_expr(a) for a in e.items)})"
    raise TypeError(f"not an expression: {e!r}")


def _decls(ds: tuple[VarDecl, ...], sep: str) -> str:
    return sep.join(f"{d.name}: {d.ty}" for d in ds)


def print_equation(eq: Equation) -> str:
    return f"{', '.join(eq.lhs)} = {print_expr(eq.rhs)};"


def print_node(n: Node) -> str:
    lines = [f"node {n.name}({_decls(n.inputs, '; ')}) returns ({_decls(n.outputs, '; ')});"]
    if n.locals:
        lines.append("var " + " ".join(f"{d.name}: {d.ty};" for d in n.locals))
    lines.append("let")
    lines.extend("  " + print_equation(eq) for eq in n.equations)
    lines.extend(f"  --!PROPERTY : {print_expr(p)};" for p in n.properties)
    lines.append("tel")
    return "\n".join(lines)


def print_program(p: Program) -> str:
    return "\n\n".join(print_node(n) for n in p.nodes) + "\n"
