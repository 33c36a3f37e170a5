import shutil
from pathlib import Path

import pytest

from lustrehorn.frontend import load_program
from lustrehorn.invariants import modular_system
from lustrehorn.normalize import normalize_program
from lustrehorn.solver import SolverConfig

HERE = Path(__file__).parent
CORPUS = HERE / "corpus"
GOLDEN = HERE / "golden"

SAFE = sorted(CORPUS.glob("*.lus"))
VIOLATED = sorted((CORPUS / "violated").glob("*.lus"))

needs_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 executable not on PATH")


def source(name: str) -> str:
    p = CORPUS / name
    if not p.suffix:
        p = p.with_suffix(".lus")
    return p.read_text()


def program(name: str):
    return load_program(source(name))


def system(name: str):
    return modular_system(normalize_program(program(name)))


@pytest.fixture
def cfg():
    return SolverConfig(timeout=60)


@pytest.fixture(scope="session")
def two_counters():
    return program("two_counters")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
