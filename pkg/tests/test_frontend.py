import json

import pytest

from conftest import SAFE, VIOLATED, source
from lustrehorn.frontend import LustreError, load_program, parse_program, print_program, typecheck
from lustrehorn.frontend.ast import BOOL, INT, Arrow, BinOp, BoolLit, Ite, VarRef, subexprs
from lustrehorn.frontend.causality import check_causality, evaluation_order, find_cycle
from lustrehorn.frontend.diagnostics import CausalityError, ParseError, TypeCheckError, UnsupportedFeature


def codes(exc):
    return [d.code for d in exc.value.diagnostics]


def test_counter_node_shape():
    p = parse_program(source("counter"))
    n = p.node("counter")
    assert [d.name for d in n.inputs] == ["reset"]
    assert [d.name for d in n.outputs] == ["active"]
    assert [d.name for d in n.locals] == ["a", "b"]
    assert len(n.equations) == 3
    assert p.main == "counter"


def test_empty_body():
    p = parse_program("node f(x: bool) returns (y: bool); let tel")
    assert p.node("f").equations == ()


def test_two_counters_main_and_property():
    p = parse_program(source("two_counters"))
    assert [n.name for n in p.nodes] == ["greycounter", "intcounter", "top"]
    assert p.main == "top"
    (prop,) = p.top.properties
    assert prop == BinOp("=", VarRef("OK"), BoolLit(True))


def test_positions_attached():
    p = parse_program(source("two_counters"))
    eq = p.node("intcounter").equations[0]
    assert eq.pos.line == 15
    assert all(e.pos is not None for e in subexprs(eq.rhs))


def test_types_inferred():
    p = typecheck(parse_program(source("two_counters")))
    a = p.node("greycounter").equations[0].rhs
    t = p.node("intcounter").equations[0].rhs
    assert isinstance(a, Arrow) and a.ty == BOOL
    assert isinstance(t.step, Ite) and t.ty == INT


@pytest.mark.parametrize("src,code", [
    ("node f(x: int) returns (y: int); let y = 1 and true; tel", "E-TYPE"),
    ("node f(x: int) returns (y: int); let y = z; tel", "E-UNDEF"),
    ("node f(x: int) returns (y: int); let tel", "E-NODEF"),
    ("node f(x: int) returns (y: int); let y = 1; y = 2; tel", "E-DUPDEF"),
    ("node f(x: int) returns (y: int); let x = 1; y = 2; tel", "E-DEFINPUT"),
    ("node g(a: int) returns (b: int); let b = a; tel\n"
     "node f(x: int) returns (y: int); let y = g(x, x); tel", "E-ARITY"),
])
def test_type_errors(src, code):
    with pytest.raises(TypeCheckError) as exc:
        typecheck(parse_program(src))
    assert code in codes(exc)


@pytest.mark.parametrize("src", [
    "node f(x: int; c: bool) returns (y: int); let y = x when c; tel",
    "node f(x: int) returns (y: int); let y = current x; tel",
    "node f(x: int^3) returns (y: int); let y = 0; tel",
    "node f(x: real) returns (y: real); let y = x; tel",
])
def test_unsupported_features(src):
    with pytest.raises(UnsupportedFeature) as exc:
        parse_program(src)
    assert codes(exc) == ["E-UNSUPPORTED"]


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_program("node f(x: int) returns (y: int);\nlet\n  y = (x + ;\ntel")
    d = exc.value.diagnostics[0]
    assert d.code == "E-SYNTAX" and d.line == 3


def test_duplicate_node():
    src = "node f(x: int) returns (y: int); let y = x; tel\n" * 2
    with pytest.raises(ParseError) as exc:
        parse_program(src)
    assert codes(exc) == ["E-DUPNODE"]


def test_main_must_not_be_called():
    with pytest.raises(ParseError) as exc:
        parse_program(source("two_counters"), main="intcounter")
    assert codes(exc) == ["E-MAIN"]


def test_causality_counter_ok():
    p = load_program(source("counter"))
    assert find_cycle(p.top) is None


def test_self_cycle():
    p = typecheck(parse_program("node f(i: int) returns (x: int); let x = x + 1; tel"))
    with pytest.raises(CausalityError) as exc:
        check_causality(p)
    assert exc.value.cycle == ["x"]


def test_two_cycle():
    src = "node f(i: int) returns (x: int); var y: int; let x = y; y = x; tel"
    with pytest.raises(CausalityError) as exc:
        check_causality(typecheck(parse_program(src)))
    assert sorted(exc.value.cycle) == ["x", "y"]
    assert "E-CYCLE" in codes(exc)


def test_pre_breaks_cycle():
    src = "node f(i: int) returns (x: int); let x = 0 -> pre x + i; tel"
    load_program(src)


def test_evaluation_order_respects_dependencies():
    src = "node f(i: int) returns (x: int); var y, z: int; let x = y + z; z = i; y = z; tel"
    p = load_program(src)
    order = [eq.lhs[0] for eq in evaluation_order(p.top)]
    assert order.index("z") < order.index("y") < order.index("x")


def test_diagnostic_json_record():
    try:
        load_program("node f(x: int) returns (y: int); let y = z; tel")
    except LustreError as exc:
        rec = json.loads(exc.with_file("f.lus").diagnostics[0].to_json())
    assert rec["file"] == "f.lus" and rec["code"] == "E-UNDEF" and rec["line"] == 1
    assert set(rec) == {"file", "line", "column", "code", "message"}


def test_properties_conjoined_per_node():
    src = ("node f(x: bool) returns (y: bool); let y = x;\n"
           "--!PROPERTY : y or not y;\n--!PROPERTY : true;\ntel")
    assert len(parse_program(src).top.properties) == 2


@pytest.mark.parametrize("path", SAFE + VIOLATED, ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    p = load_program(path.read_text())
    again = parse_program(print_program(p))
    assert again == parse_program(path.read_text())
