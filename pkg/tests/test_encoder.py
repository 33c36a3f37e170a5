import pytest

from conftest import GOLDEN, SAFE, needs_solver, program, system
from lustrehorn.frontend import load_program
from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import Encoding, EncodingError, HornSystem, encode
from lustrehorn.horn.inline import MonoSignatureError, emit_mono_check, inline
from lustrehorn.horn.render import render_smtlib
from lustrehorn.horn.terms import Definition, Var
from lustrehorn.normalize import CallDef, MemDef, SimpleDef, normalize_program

SHORT = {
    "GC": "greycounter", "GC_Init": "greycounter_Init", "IC": "intcounter",
    "IC_Init": "intcounter_Init", "T": "top", "T_Init": "top_Init", "M": "Main", "Error": "Error",
}


def enc(name):
    return Encoding(normalize_program(program(name)))


def test_arities_two_counters():
    h = system("two_counters")
    ar = {r.name: r.arity for r in h.relations}
    assert ar == {
        "greycounter": 6, "greycounter_Init": 4, "intcounter": 4, "intcounter_Init": 3,
        "top": 8, "top_Init": 5, "Main": 5, "Error": 0,
    }
    assert len(h.rules) == 9


def test_golden_bytes():
    text = render_smtlib(system("two_counters"))
    assert text == (GOLDEN / "two_counters.modular.smt2").read_text()


def test_golden_matches_handwritten_encoding():
    oracle = pytest.importorskip("horn_oracle")
    ours = (GOLDEN / "two_counters.modular.smt2").read_text()
    theirs = (GOLDEN / "two_counters.handwritten.smt2").read_text()
    assert oracle.arities(theirs) == {k: oracle.arities(ours)[v] for k, v in SHORT.items()}
    assert oracle.equivalent_systems(ours, theirs, SHORT) == []


def test_handwritten_oracle_detects_changes():
    oracle = pytest.importorskip("horn_oracle")
    ours = (GOLDEN / "two_counters.modular.smt2").read_text()
    theirs = (GOLDEN / "two_counters.handwritten.smt2").read_text()
    assert oracle.equivalent_systems(ours, theirs.replace("(= t 3)", "(= t 4)"), SHORT) == ["intcounter"]


def test_phi_memdef_primed():
    e = enc("counter")
    n = e.nodes["counter"]
    f = e.phi(n, [eq for eq in n.trans_eqs if isinstance(eq, MemDef) and eq.var == "p1_b"], False)
    assert t.to_smt(f) == "(= p1_b_p b)"


def test_phi_simple():
    e = enc("counter")
    n = e.nodes["counter"]
    f = e.phi(n, [eq for eq in n.trans_eqs if isinstance(eq, SimpleDef) and eq.var == "active"], False)
    assert t.to_smt(f) == "(= active (and a b))"


def test_phi_call():
    e = enc("two_counters")
    n = e.nodes["top"]
    call = next(eq for eq in n.trans_eqs if isinstance(eq, CallDef) and eq.callee == "greycounter")
    f = e.phi(n, [call], False)
    assert t.to_smt(f) == (
        "(greycounter reset b u1_greycounter_p1_a u1_greycounter_p1_b "
        "u1_greycounter_p1_a_p u1_greycounter_p1_b_p)"
    )
    g = e.phi(n, [call], True)
    assert t.to_smt(g) == "(greycounter_Init reset b u1_greycounter_p1_a_p u1_greycounter_p1_b_p)"


def test_memory_reads_unprimed():
    h = system("two_counters")
    (rule,) = [r for r in h.rules if r.head.rel == "intcounter"]
    assert "(= p1_time 3)" in t.to_smt(rule.body)
    assert "(= p1_time_p time)" in t.to_smt(rule.body)


def test_init_rule_scope():
    h = system("two_counters")
    (rule,) = [r for r in h.rules if r.head.rel == "greycounter_Init"]
    assert set(rule.variables) >= {"p1_a_p", "p1_b_p"}
    assert "p1_a" not in rule.variables


def test_unguarded_memory_free_in_init():
    src = "node f(x: int) returns (y: int); let y = pre x; tel"
    h = encode(normalize_program(load_program(src)))
    (init,) = [r for r in h.rules if r.head.rel == "f_Init"]
    assert "(= y p1_x)" in t.to_smt(init.body)
    assert "p1_x" in init.variables and "p1_x" not in {p.name for p in h.relation("f_Init").params}


def test_stateless_pass_through():
    src = "node f(i: int) returns (o: int); let o = i; tel"
    h = encode(normalize_program(load_program(src)))
    (rule,) = [r for r in h.rules if r.head.rel == "f"]
    assert t.to_smt(rule.body) == "(= o i)"
    assert h.relation("Main").arity == 2


def test_main_rules_shape():
    h = system("two_counters")
    r3, r4 = [r for r in h.rules if r.head.rel == "Main"]
    assert t.to_smt(r3.body).startswith("(top_Init reset OK ")
    apps = list(t.apps(r4.body))
    assert [a.rel for a in apps] == ["top", "Main"]
    assert apps[0].args[0] == Var("reset_p", "Bool")
    assert r4.head.args[0] == Var("reset_p", "Bool")


def test_property_rule():
    h = system("two_counters")
    (r5,) = h.rules_for("Error")
    assert t.to_smt(r5.body).endswith("(not (= OK true)))")


def test_property_true_and_false():
    src = "node f(x: bool) returns (y: bool); let y = x; --!PROPERTY : %s; tel"
    h_true = encode(normalize_program(load_program(src % "true")))
    (r,) = h_true.rules_for("Error")
    assert t.FALSE in t.conjuncts(r.body) or t.to_smt(r.body).endswith("false)")
    h_false = encode(normalize_program(load_program(src % "false")))
    (r,) = h_false.rules_for("Error")
    assert t.to_smt(r.body) == "(Main x y)"


def test_property_outside_signature():
    e = enc("two_counters")
    from lustrehorn.frontend.ast import VarRef
    with pytest.raises(EncodingError):
        e.property_term([VarRef("b")])


@pytest.mark.parametrize("path", SAFE, ids=lambda p: p.stem)
def test_rule_count_law(path):
    np_ = normalize_program(load_program(path.read_text()))
    h = encode(np_)
    assert len(h.rules) == 2 * len(np_.nodes) + 3
    h.check()


def test_declaration_order_callees_first():
    h = system("chain")
    names = [r.name for r in h.relations]
    assert names.index("toggle") < names.index("pair") < names.index("top")
    assert names[-2:] == ["Main", "Error"]


def test_prime_suffix_avoids_collisions():
    src = "node f(x: int) returns (y: int); var y_p: int; let y_p = x; y = 0 -> pre y_p; tel"
    e = Encoding(normalize_program(load_program(src)))
    assert e.prime != "_p"
    h = e.system()
    assert len({p.name for p in h.relation("f").params}) == h.relation("f").arity


def test_render_deterministic_and_dialects():
    h = system("two_counters")
    a = render_smtlib(h, "rule")
    assert a == render_smtlib(system("two_counters"), "rule")
    assert a.count("(query Error)") == 1
    assert a.count("(declare-rel ") == 8
    b = render_smtlib(h, "horn")
    assert b.startswith("(set-logic HORN)")
    assert "(declare-fun Error" not in b
    assert b.count("=> (and (Main") == 1 and " false))" in b
    assert b.endswith("(check-sat)\n(get-model)\n")
    with pytest.raises(ValueError):
        render_smtlib(h, "sexpr")


def test_render_empty_system():
    text = render_smtlib(HornSystem((), (), "Error"))
    assert text == "(query Error)\n"


def test_inline_no_calls_is_identity_in_shape():
    h = system("counter")
    m = inline(h)
    assert not list(t.apps(m.trans_body)) and not list(t.apps(m.init_body))
    assert t.free_vars(m.trans_body).keys() >= {"p1_a", "p1_b", "p1_a_p", "p1_b_p"}


def test_inline_two_counters_resolves_calls():
    m = inline(system("two_counters"))
    smt = t.to_smt(m.trans_body)
    assert "ite" in smt and not list(t.apps(m.trans_body))
    assert {"u1_greycounter_p1_a", "u2_intcounter_p1_time_p"} <= set(t.free_vars(m.trans_body))


def test_inline_chain_twice_prefixed():
    m = inline(system("chain"))
    fv = set(t.free_vars(m.trans_body))
    assert {"u3_pair_u1_toggle_p1_q", "u3_pair_u2_toggle_p1_q_p"} <= fv


def test_mono_check_structure():
    h = system("two_counters")
    main = h.relation("Main")
    mono = Definition("MONO", tuple(p.var for p in main.params), t.TRUE)
    hc = emit_mono_check(mono, h)
    labels = [r.label for r in hc.rules]
    assert labels[-2:] == ["(vi) mono init", "(vii) mono step"]
    assert "Main" not in {r.name for r in hc.relations}
    text = render_smtlib(hc)
    assert "(define-fun MONO " in text
    r7 = hc.rules[-1]
    nots = [c for c in t.conjuncts(r7.body) if isinstance(c, t.Op) and c.op == "not"]
    assert len(nots) == 1


def test_mono_signature_mismatch():
    h = system("two_counters")
    bad = Definition("MONO", (Var("x", "Bool"),), t.TRUE)
    with pytest.raises(MonoSignatureError):
        emit_mono_check(bad, h)


@needs_solver
def test_mutation_changes_semantics():
    from mutations import swap_primes
    from lustrehorn.solver import Sat, Unsat, solve
    h = system("two_counters")
    assert isinstance(solve(h), Unsat)
    assert isinstance(solve(swap_primes(h, "intcounter")), Sat)
