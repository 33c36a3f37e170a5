"""Hypothesis strategies for small, well-formed Lustre programs.

Programs have one optional stateful callee ``sub`` and a top node whose
variables are defined in order: instantaneous reads only see inputs and
earlier variables, while ``pre`` may read any variable. ``pre`` only occurs
on the right of an arrow, so every program is causal and fully initialized.
"""

from hypothesis import strategies as st

SUBS = [
    "node sub(a: int; c: bool) returns (r: int);\nlet\n  r = a -> if c then pre r else pre r + a;\ntel\n",
    "node sub(a: int; c: bool) returns (r: int);\nvar m: int;\nlet\n  m = 0 -> pre m + 1;\n"
    "  r = if c then m else a - m;\ntel\n",
    "node sub(a: int; c: bool) returns (r: int);\nlet\n  r = if c then a else 0 - a;\ntel\n",
]


@st.composite
def int_expr(draw, inst, mem, depth, pre_ok, call_ok):
    leaves = [st.integers(0, 3).map(str)]
    if inst["int"]:
        leaves.append(st.sampled_from(inst["int"]))
    if pre_ok and mem["int"]:
        leaves.append(st.sampled_from(mem["int"]).map(lambda v: f"pre {v}"))
    if depth <= 0:
        return draw(st.one_of(leaves))
    kind = draw(st.sampled_from(["leaf", "leaf", "add", "sub", "ite", "pre", "call"]))
    sub = lambda: draw(int_expr(inst, mem, depth - 1, pre_ok, call_ok))
    if kind == "add":
        return f"({sub()} + {sub()})"
    if kind == "sub":
        return f"({sub()} - {sub()})"
    if kind == "ite":
        c = draw(bool_expr(inst, mem, depth - 1, pre_ok, call_ok))
        return f"(if {c} then {sub()} else {sub()})"
    if kind == "pre" and pre_ok:
        inner = draw(int_expr(inst, mem, depth - 1, False, False))
        return f"pre ({inner})"
    if kind == "call" and call_ok:
        c = draw(bool_expr(inst, mem, depth - 1, pre_ok, False))
        return f"sub({sub()}, {c})"
    return draw(st.one_of(leaves))


@st.composite
def bool_expr(draw, inst, mem, depth, pre_ok, call_ok):
    leaves = [st.sampled_from(["true", "false"])]
    if inst["bool"]:
        leaves.append(st.sampled_from(inst["bool"]))
    if pre_ok and mem["bool"]:
        leaves.append(st.sampled_from(mem["bool"]).map(lambda v: f"pre {v}"))
    if depth <= 0:
        return draw(st.one_of(leaves))
    kind = draw(st.sampled_from(["leaf", "leaf", "and", "or", "not", "le", "eq"]))
    sub = lambda: draw(bool_expr(inst, mem, depth - 1, pre_ok, call_ok))
    num = lambda: draw(int_expr(inst, mem, depth - 1, pre_ok, call_ok))
    if kind == "and":
        return f"({sub()} and {sub()})"
    if kind == "or":
        return f"({sub()} or {sub()})"
    if kind == "not":
        return f"(not {sub()})"
    if kind == "le":
        return f"({num()} <= {num()})"
    if kind == "eq":
        return f"({num()} = {num()})"
    return draw(st.one_of(leaves))


@st.composite
def programs(draw, max_locals=4, depth=2):
    with_sub = draw(st.booleans())
    n = draw(st.integers(0, max_locals))
    local_types = [draw(st.sampled_from(["int", "bool"])) for _ in range(n)]
    order = [(f"v{i}", ty) for i, ty in enumerate(local_types)] + [("o", "int"), ("q", "bool")]
    mem = {"int": [v for v, ty in order if ty == "int"], "bool": [v for v, ty in order if ty == "bool"]}
    inst = {"int": ["x"], "bool": ["c"]}
    lines = []
    for var, ty in order:
        gen = int_expr if ty == "int" else bool_expr
        if draw(st.booleans()):
            init = draw(gen(inst, mem, depth, False, with_sub))
            step = draw(gen(inst, mem, depth, True, with_sub))
            lines.append(f"  {var} = {init} -> {step};")
        else:
            lines.append(f"  {var} = {draw(gen(inst, mem, depth, False, with_sub))};")
        inst[ty] = inst[ty] + [var]
    top = "node top(x: int; c: bool) returns (o: int; q: bool);\n"
    if n:
        top += "var " + " ".join(f"{v}: {ty};" for v, ty in order[:-2]) + "\n"
    head = draw(st.sampled_from(SUBS)) if with_sub else ""
    return head + top + "let\n" + "\n".join(lines) + "\n  --!PROPERTY : q or not q;\ntel\n"


@st.composite
def dependency_graphs(draw, max_vars=6):
    """(n, instant edges, delayed edges) over variables v0..v{n-1}."""
    n = draw(st.integers(1, max_vars))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
    instant = draw(st.sets(pairs, max_size=n + 2))
    delayed = draw(st.sets(pairs, max_size=n))
    return n, instant, delayed


def graph_source(n, instant, delayed) -> str:
    decls = " ".join(f"v{i}: int;" for i in range(1, n))
    eqs = []
    for i in range(n):
        terms = ["x"] + [f"v{j}" for a, j in sorted(instant) if a == i]
        terms += [f"pre v{j}" for a, j in sorted(delayed) if a == i]
        eqs.append(f"  v{i} = {' + '.join(terms)};")
    var = f"var {decls}\n" if decls else ""
    return f"node f(x: int) returns (v0: int);\n{var}let\n" + "\n".join(eqs) + "\ntel\n"
