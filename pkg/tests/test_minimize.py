import itertools

import pytest
from hypothesis import given, strategies as st

from conftest import SAFE, needs_solver, system
from lustrehorn.frontend import load_program
from lustrehorn.invariants import SOUND, modular_system
from lustrehorn.minimize import (
    AbstractionMap, Rank, UnrankedType, abstract, label_order, lex_less, minimize, rank, refine, type_rank,
)
from lustrehorn.normalize import normalize_program
from lustrehorn.solver import Sat, Unsat, solve

P = {"v": "int", "w": "int", "b": "bool"}
Q = {"b1": "bool", "b2": "bool"}
R = {"w": "bitvector(1000)"}


def test_rank_table():
    assert rank(P) == Rank(2, 1)
    assert rank(Q) == Rank(0, 2)
    assert rank(R) == Rank(0, 1000)


def test_lex_order_of_table():
    assert lex_less(rank(Q), rank(R)) and lex_less(rank(R), rank(P))
    assert lex_less(rank(Q), rank(P))
    assert not lex_less(rank(P), rank(Q)) and not lex_less(rank(R), rank(Q))


def test_type_rank_spellings():
    assert type_rank("Bool") == Rank(0, 1)
    assert type_rank("Int") == Rank(1, 0)
    assert type_rank(("bv", 8)) == Rank(0, 8)
    assert type_rank("(_ BitVec 16)") == Rank(0, 16)
    assert rank([("x", "int"), ("x", "int")]) == Rank(2, 0)


def test_unranked_type():
    with pytest.raises(UnrankedType):
        type_rank("real")


def test_empty_rank():
    assert rank({}) == Rank(0, 0)
    assert str(Rank(1, 2)) == "(1,2)"


ranks = st.builds(Rank, st.integers(0, 50), st.integers(0, 50))


@given(ranks, ranks)
def test_rank_addition(a, b):
    assert a + b == b + a
    assert (a + b).ints == a.ints + b.ints and (a + b).bits == a.bits + b.bits


@given(ranks, ranks, ranks)
def test_lex_is_strict_total_order(a, b, c):
    assert not lex_less(a, a)
    if a != b:
        assert lex_less(a, b) != lex_less(b, a)
    else:
        assert not lex_less(a, b) and not lex_less(b, a)
    if lex_less(a, b) and lex_less(b, c):
        assert lex_less(a, c)


def test_label_order_follows_signatures():
    h = system("two_counters")
    labels = label_order(h)
    assert labels[:2] == [("greycounter", "p1_a"), ("greycounter", "p1_b")]
    assert ("top", "u2_intcounter_p1_time") in labels


def test_full_abstraction_is_identity():
    h = system("two_counters")
    ha = abstract(h, AbstractionMap.full(h))
    assert ha.relations == h.relations and ha.rules == h.rules


def test_empty_abstraction_drops_state():
    h = system("two_counters")
    ha = abstract(h, AbstractionMap.empty(h))
    assert ha.relation("greycounter").arity == 2
    assert ha.relation("Main").arity == 2
    assert len(ha.rules) == len(h.rules)


def test_closure_follows_instances():
    h = system("two_counters")
    m = AbstractionMap.empty(h).add([("top", "u2_intcounter_p1_time")], h)
    assert m.keeps("intcounter", "p1_time")
    assert not m.keeps("greycounter", "p1_a")


@needs_solver
def test_empty_abstraction_of_two_counters_is_sat():
    h = system("two_counters")
    assert isinstance(solve(abstract(h, AbstractionMap.empty(h))), Sat)


@needs_solver
def test_refine_reinstates_the_counter():
    h = system("two_counters")
    keep = [("greycounter", "p1_a"), ("greycounter", "p1_b"),
            ("top", "u1_greycounter_p1_a"), ("top", "u1_greycounter_p1_b")]
    m = AbstractionMap.empty(h).add(keep, h)
    v = solve(abstract(h, m))
    assert isinstance(v, Sat)
    m2 = refine(h, m, v.trace)
    assert m2.size() > m.size()
    assert m2.keeps("intcounter", "p1_time") or m2.keeps("top", "u2_intcounter_p1_time")


@needs_solver
def test_dead_variable_is_dropped():
    h = system("dead_var")
    res = minimize(h, name="dead_var")
    assert res.status == "minimized" and res.reduced
    assert res.original_rank == Rank(2, 0) and res.final_rank == Rank(1, 0)
    assert res.abstraction.keeps("top", "p1_t") and not res.abstraction.keeps("top", "p1_v")
    assert isinstance(solve(res.system), Unsat)
    assert res.report is not None and res.report.status == SOUND


@needs_solver
def test_symmetric_flags_keep_the_first():
    h = system("sym_flags")
    res = minimize(h)
    assert res.final_rank == Rank(0, 1)
    assert res.abstraction.to_dict(h)["top"] == ["p1_f"]


@needs_solver
def test_no_reduction_marker():
    h = system("two_counters")
    res = minimize(h)
    assert res.status == "no-reduction" and not res.reduced
    d = res.to_dict(h)
    assert d["marker"] == "no reduction"
    assert res.report.status == SOUND


@needs_solver
def test_iteration_cap_warns():
    h = system("two_counters")
    res = minimize(h, max_iter=1)
    assert res.status == "iteration-cap"
    assert any("cap" in w for w in res.warnings)
    assert res.system is h and res.report.status == SOUND


@needs_solver
def test_violated_property_refused():
    from lustrehorn.minimize import PropertyViolated
    src = "node f(x: bool) returns (y: bool); let y = x; --!PROPERTY : y; tel"
    with pytest.raises(PropertyViolated):
        minimize(modular_system(normalize_program(load_program(src))))


@needs_solver
@pytest.mark.parametrize("path", SAFE, ids=lambda p: p.stem)
def test_abstraction_soundness(path):
    """Unsat for any abstraction implies Unsat for the concrete system."""
    h = modular_system(normalize_program(load_program(path.read_text())))
    concrete = solve(h)
    labels = label_order(h)
    maps = [AbstractionMap.empty(h), AbstractionMap.full(h)]
    maps += [AbstractionMap.empty(h).add([lab], h) for lab in labels[:4]]
    maps += [AbstractionMap.empty(h).add(pair, h) for pair in itertools.islice(itertools.combinations(labels, 2), 3)]
    for m in maps:
        if isinstance(solve(abstract(h, m)), Unsat):
            assert isinstance(concrete, Unsat)
    res = minimize(h)
    assert isinstance(solve(res.system), Unsat)
    assert not lex_less(res.original_rank, res.final_rank)
