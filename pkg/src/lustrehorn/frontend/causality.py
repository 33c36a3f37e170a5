"""Instantaneous-dependency analysis (no algebraic loops)."""

from __future__ import annotations

from graphlib import CycleError, TopologicalSorter

from lustrehorn.frontend.ast import Equation, Node, Program, TupleExpr, vars_read
from lustrehorn.frontend.diagnostics import CausalityError, at


def equation_deps(eq: Equation) -> dict[str, set[str]]:
    """For each defined variable, the variables it reads outside any ``pre``.

    A tuple literal is split componentwise; a node call makes every result
    depend on every argument.
    """
    if len(eq.lhs) > 1 and isinstance(eq.rhs, TupleExpr):
        return {v: set(vars_read(item, under_pre=False)) for v, item in zip(eq.lhs, eq.rhs.items)}
    reads = set(vars_read(eq.rhs, under_pre=False))
    return {v: set(reads) for v in eq.lhs}


def dependency_graph(n: Node) -> dict[str, set[str]]:
    """``graph[w]`` is the set of defined variables ``w`` reads instantaneously."""
    defined = {v for eq in n.equations for v in eq.lhs}
    graph: dict[str, set[str]] = {v: set() for v in defined}
    for eq in n.equations:
        for w, reads in equation_deps(eq).items():
            graph[w] |= reads & defined
    return graph


def split_tuples(equations) -> list[Equation]:
    """Split ``a, b = (x, y)`` into ``a = x`` and ``b = y``."""
    out = []
    for eq in equations:
        if len(eq.lhs) > 1 and isinstance(eq.rhs, TupleExpr):
            out.extend(Equation((v,), item, eq.pos) for v, item in zip(eq.lhs, eq.rhs.items))
        else:
            out.append(eq)
    return out


def evaluation_order(n: Node) -> list[Equation]:
    """Equations of ``n`` (tuple literals split) with instantaneous dependencies first."""
    graph = dependency_graph(n)
    order = list(TopologicalSorter(graph).static_order())
    rank = {v: i for i, v in enumerate(order)}
    return sorted(split_tuples(n.equations), key=lambda eq: max(rank[v] for v in eq.lhs))


def find_cycle(n: Node) -> list[str] | None:
    try:
        tuple(TopologicalSorter(dependency_graph(n)).static_order())
    except CycleError as exc:
        cycle = exc.args[1]
        # graphlib reports [a, b, ..., a] with edges pointing at dependencies
        return list(reversed(cycle[:-1]))
    return None


def check_causality(p: Program) -> Program:
    """Return ``p`` unchanged if every node is causal, else raise with one cycle."""
    for n in p.nodes:
        cycle = find_cycle(n)
        if cycle is not None:
            eq = n.definition_of(cycle[0])
            raise CausalityError(
                [at(eq.pos if eq else n.pos, "E-CYCLE",
                    f"causality cycle in node {n.name!r}: " + " -> ".join(cycle + [cycle[0]]))],
                cycle=cycle,
            )
    return p
