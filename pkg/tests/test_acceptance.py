"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary under "acceptance criteria".
"""

import json
import random
import time

import pytest

from acceptance_log import criterion
from conftest import CORPUS, GOLDEN, HERE, SAFE, VIOLATED, needs_solver, program, source
from lustrehorn.cli import main
from lustrehorn.frontend import load_program
from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import encode
from lustrehorn.horn.render import render_smtlib
from lustrehorn.invariants import SOUND, extract_modular, modular_system
from lustrehorn.minimize import (
    AbstractionMap, Rank, abstract, label_order, lex_less, minimize, rank,
)
from lustrehorn.normalize import normalize_program
from lustrehorn.simulate import NormalizedSimulator, Simulator, cosimulate, equal_outputs, random_inputs
from lustrehorn.solver import Unsat, solve

z3 = pytest.importorskip("z3")
oracle = pytest.importorskip("horn_oracle")

MONO = HERE / "data" / "mono_two_counters.smt2"
SHORT = {
    "GC": "greycounter", "GC_Init": "greycounter_Init", "IC": "intcounter",
    "IC_Init": "intcounter_Init", "T": "top", "T_Init": "top_Init", "M": "Main", "Error": "Error",
}


def _z3_formula(entry: dict):
    """Parse a report entry with z3 directly, bypassing the package."""
    env = {}
    for p in entry["params"]:
        env[p["name"]] = z3.Bool(p["name"]) if p["sort"] == "Bool" else z3.Int(p["name"])
    return z3.parse_smt2_string(f"(assert {entry['formula']})", decls=env)[0], env


def _oracle_model(report) -> dict:
    return {
        e.relation: ([(p.name, p.sort) for p in e.definition.params], t.to_smt(e.definition.body))
        for e in report.entries
    }


def test_criterion_1_two_counters_encoding():
    with criterion(1, "two-counters Horn system: arities, 9 rules, golden up to renaming", 1.0) as notes:
        start = time.monotonic()
        h = encode(normalize_program(load_program(source("two_counters"))))
        text = render_smtlib(h)
        compile_s = time.monotonic() - start
        arities = {r.name: r.arity for r in h.relations}
        assert arities == {
            "greycounter": 6, "greycounter_Init": 4, "intcounter": 4, "intcounter_Init": 3,
            "top": 8, "top_Init": 5, "Main": 5, "Error": 0,
        }, arities
        assert len(h.rules) == 2 * 3 + 2 + 1
        assert text == (GOLDEN / "two_counters.modular.smt2").read_text()
        hand = (GOLDEN / "two_counters.handwritten.smt2").read_text()
        notes["detail"] = f"compile {compile_s * 1000:.0f} ms"
        assert compile_s < 1.0
    # the renaming comparison is an independent z3 check, timed separately
    assert oracle.equivalent_systems(text, hand, SHORT) == []


@needs_solver
def test_criterion_2_counter_bound(tmp_path):
    with criterion(2, "verify two_counters Unsat; IC invariant entails 0 <= time' <= 3", 30.0) as notes:
        start = time.monotonic()
        code = main(["verify", str(CORPUS / "two_counters.lus"), "--out", str(tmp_path)])
        timings = json.loads((tmp_path / "two_counters.timings.json").read_text())
        assert code == 0, f"verify exit code {code}"
        report = json.loads((tmp_path / "two_counters.invariants.json").read_text())
        ic = next(r for r in report["relations"] if r["relation"] == "intcounter")
        f, env = _z3_formula(ic)
        tp = env["p1_time_p"]
        s = z3.Solver()
        s.add(f, z3.Not(z3.And(tp >= 0, tp <= 3)))
        ans = s.check()
        assert time.monotonic() - start < 30 and timings["modular"] < 30
        if ans != z3.unsat:
            m = s.model() if ans == z3.sat else None
            notes["detail"] = (
                "IC(reset, out, p1_time, p1_time_p) admits p1_time_p outside [0, 3]; countermodel "
                + (", ".join(f"{d.name()}={m[d]}" for d in sorted(m.decls(), key=lambda d: d.name())) if m else str(ans))
            )
        assert ans == z3.unsat, notes.get("detail")


@needs_solver
def test_criterion_3_model_soundness():
    with criterion(3, "every Unsat model on the corpus validates rule by rule", 60.0) as notes:
        assert len(SAFE) >= 10
        names = {p.stem for p in SAFE}
        assert {"counter", "two_counters"} <= names
        checked = 0
        for path in SAFE:
            p = load_program(path.read_text())
            res = extract_modular(p, name=path.stem)
            assert isinstance(res.verdict, Unsat), f"{path.stem}: {res.verdict}"
            assert res.report.status == SOUND, f"{path.stem}: {res.report.validation.failures}"
            bad = oracle.model_violations(render_smtlib(res.system), _oracle_model(res.report))
            assert bad == [], f"{path.stem}: independent check rejects {bad}"
            checked += 1
        notes["detail"] = f"{checked} programs, package and independent checks agree"


@needs_solver
def test_criterion_4_reconstruct_given_mono(tmp_path, capsys):
    with criterion(4, "reconstruct from the transcribed MONO: Unsat, validated GC/IC/T", 30.0) as notes:
        code = main(["reconstruct", str(CORPUS / "two_counters.lus"), "--mono", str(MONO),
                     "--out", str(tmp_path)])
        if code != 0:
            trace = tmp_path / "two_counters.trace.txt"
            facts = [ln[2:] for ln in trace.read_text().splitlines()[1:] if ln.startswith("# ") and "(" in ln] \
                if trace.exists() else []
            notes["detail"] = f"exit {code}; solver counterexample to induction: " + "; ".join(facts)
        assert code == 0, notes.get("detail")
        report = json.loads((tmp_path / "two_counters.invariants.json").read_text())
        assert report["status"] == SOUND
        assert {"greycounter", "intcounter", "top"} <= {r["relation"] for r in report["relations"]}


def test_criterion_5_rank_order():
    with criterion(5, "rank table and lexicographic order Q < R < P"):
        P = rank({"v": "int", "w": "int", "b": "bool"})
        Q = rank({"b1": "bool", "b2": "bool"})
        R = rank({"w": "bitvector(1000)"})
        assert (P, Q, R) == (Rank(2, 1), Rank(0, 2), Rank(0, 1000))
        assert lex_less(Q, R) and lex_less(R, P) and lex_less(Q, P)
        assert not lex_less(R, Q) and not lex_less(P, R) and not lex_less(P, P)


@needs_solver
def test_criterion_6_minimization():
    with criterion(6, "dead-variable fixture minimizes; abstraction soundness on every fixture", 60.0) as notes:
        h = modular_system(normalize_program(program("dead_var")))
        res = minimize(h, name="dead_var")
        assert lex_less(res.final_rank, res.original_rank), (res.original_rank, res.final_rank)
        assert isinstance(solve(res.system), Unsat)
        checked = 0
        for path in SAFE + VIOLATED:
            hp = modular_system(normalize_program(load_program(path.read_text())))
            concrete = solve(hp)
            labels = label_order(hp)
            maps = [AbstractionMap.empty(hp)] + [AbstractionMap.empty(hp).add([lab], hp) for lab in labels]
            for m in maps:
                if isinstance(solve(abstract(hp, m)), Unsat):
                    assert isinstance(concrete, Unsat), path.stem
                checked += 1
        notes["detail"] = f"dead_var {res.original_rank} -> {res.final_rank}; {checked} abstractions checked"


@needs_solver
def test_criterion_7_cosimulation():
    with criterion(7, "co-simulation k=10, 100 trials over the corpus; swap mutation detected", 300.0) as notes:
        total = 0
        for path in SAFE:
            p = load_program(path.read_text())
            rep = cosimulate(p, encode(normalize_program(p)), k=10, trials=100, seed=2024)
            assert rep.ok, f"{path.stem}: {rep.disagreements[0]}"
            total += rep.checked_a + rep.checked_b
        from mutations import swap_primes
        p = program("two_counters")
        depths = []
        for node in ("greycounter", "intcounter"):
            bad = swap_primes(encode(normalize_program(p)), node)
            rep = cosimulate(p, bad, k=10, trials=100, seed=2024)
            assert not rep.ok, f"swap in {node} not detected"
            depths.append(f"{node} at depth {len(rep.disagreements[0].inputs)}")
        notes["detail"] = f"{total} checks, zero disagreements; mutations caught: " + ", ".join(depths)


def test_criterion_8_normalization_equivalence():
    with criterion(8, "original vs normalized simulation agree on 100 random traces per program", 60.0) as notes:
        runs = 0
        for path in SAFE:
            p = load_program(path.read_text())
            np_ = normalize_program(p)
            rng = random.Random(path.stem)
            for _ in range(100):
                inputs = random_inputs(p.top, 20, rng)
                assert equal_outputs(Simulator(p).run(inputs), NormalizedSimulator(np_).run(inputs)), path.stem
                runs += 1
        notes["detail"] = f"{runs} traces"
