import random

import pytest

from conftest import SAFE, needs_solver, program, source, system
from lustrehorn.frontend import load_program
from lustrehorn.normalize import normalize_program
from lustrehorn.simulate import (
    NormalizedSimulator, Simulator, Trace, cosimulate, equal_outputs, format_trace, parse_trace_text,
    random_inputs, run_trace,
)

QUIET = [{"reset": False}] * 8


def test_counter_active_every_fourth_instant():
    tr = run_trace(program("counter"), QUIET)
    assert [k for k, v in enumerate(tr.outputs("active")) if v] == [2, 6]


@pytest.mark.parametrize("node", ["greycounter", "intcounter"])
def test_counters_have_period_four(node):
    tr = Simulator(program("two_counters")).run([{"reset": False}] * 12, node=node)
    out = tr.outputs("out")
    assert out == [False, False, True, False] * 3


def test_reset_restarts_counters():
    p = program("two_counters")
    inputs = [{"reset": False}] * 3 + [{"reset": True}] + [{"reset": False}] * 4
    for node in ("greycounter", "intcounter"):
        out = Simulator(p).run(inputs, node=node).outputs("out")
        assert out == [False, False, True, False, False, True, False, False]


def test_property_holds_on_random_runs():
    p = program("two_counters")
    rng = random.Random(3)
    for _ in range(20):
        tr = run_trace(p, random_inputs(p.top, 20, rng))
        assert all(tr.outputs("OK"))


def test_empty_input_sequence():
    tr = run_trace(program("two_counters"), [])
    assert len(tr) == 0 and format_trace(tr) == ""


def test_mutated_program_breaks_property():
    p = load_program(source("two_counters").replace("out = (time = 2)", "out = (time = 1)"))
    ok = run_trace(p, QUIET).outputs("OK")
    assert ok[0] is True and ok[1] is False


def test_integer_saturation():
    p = program("saturate")
    rng = random.Random(11)
    tr = run_trace(p, random_inputs(p.top, 30, rng))
    assert len(tr) == 30


def test_trace_text_round_trip():
    p = program("two_counters")
    rng = random.Random(5)
    inputs = random_inputs(p.top, 6, rng)
    tr = run_trace(p, inputs)
    text = format_trace(tr)
    assert text.splitlines()[0].startswith("step 0: reset=")
    assert parse_trace_text(text, p.top) == inputs


def test_trace_text_errors():
    p = program("two_counters")
    with pytest.raises(ValueError):
        parse_trace_text("step 1: reset=true\n", p.top)
    with pytest.raises(ValueError):
        parse_trace_text("step 0: OK=true\n", p.top)
    with pytest.raises(ValueError):
        parse_trace_text("reset=true\n", p.top)
    assert parse_trace_text("# comment only\n\n", p.top) == []


@pytest.mark.parametrize("path", SAFE, ids=lambda p: p.stem)
def test_normalized_simulator_agrees(path):
    p = load_program(path.read_text())
    np_ = normalize_program(p)
    rng = random.Random(path.stem)
    for _ in range(20):
        inputs = random_inputs(p.top, 10, rng)
        a = Simulator(p).run(inputs)
        b = NormalizedSimulator(np_).run(inputs)
        assert equal_outputs(a, b), path.stem


def test_unguarded_pre_is_logged():
    p = load_program("node f(x: int) returns (y: int); let y = pre x; tel")
    sim = Simulator(p)
    tr = sim.run([{"x": 1}, {"x": 2}])
    assert sim.log.unguarded
    assert tr.outputs("y")[1] == 1


@needs_solver
def test_cosimulation_agrees_on_two_counters():
    rep = cosimulate(program("two_counters"), system("two_counters"), k=6, trials=10, seed=1)
    assert rep.ok and rep.checked_a == 10 and rep.checked_b == 10
    assert rep.to_dict()["agreement"] is True


@needs_solver
def test_cosimulation_detects_swapped_primes():
    from mutations import swap_primes
    bad = swap_primes(system("two_counters"), "intcounter")
    rep = cosimulate(program("two_counters"), bad, k=6, trials=10, seed=1)
    assert not rep.ok
    d = rep.disagreements[0]
    assert len(d.inputs) <= 6 and d.direction in ("execution-not-derivable", "derivation-differs")


@needs_solver
def test_cosimulation_zero_depth():
    rep = cosimulate(program("counter"), system("counter"), k=0, trials=5)
    assert rep.ok and rep.checked_a == 0


def test_trace_inputs_property():
    tr = Trace((({"x": True}, {"y": False}),))
    assert tr.inputs() == [{"x": True}] and tr.outputs("y") == [False]
