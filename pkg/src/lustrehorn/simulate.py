"""Reference interpreter, trace I/O and Horn co-simulation.

Two interpreters are provided. :class:`Simulator` runs the source program
directly and serves as the oracle. :class:`NormalizedSimulator` runs the
normalized equations (initial-instant forms at step 0, step forms after),
with state laid out exactly as the state signature.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from graphlib import TopologicalSorter

from lustrehorn.frontend.ast import (
    BOOL, Arrow, BinOp, BoolLit, Call, Expr, IntLit, Ite, Node, Pre, Program, TupleExpr,
    UnOp, VarRef, subexprs, vars_read,
)
from lustrehorn.frontend.causality import evaluation_order
from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import IN, OUT, HornSystem
from lustrehorn.normalize import CallDef, MemDef, NormalizedNode, NormalizedProgram, SimpleDef
from lustrehorn.solver import SolverConfig, run_script
from lustrehorn.sexp import parse_all
from lustrehorn.state import StateAnalysis
from lustrehorn.unroll import unroll

log = logging.getLogger(__name__)


def default_value(ty):
    return False if ty == BOOL else 0


def _binop(op: str, a, b):
    if op == "and":
        return a and b
    if op == "or":
        return a or b
    if op == "xor":
        return a != b
    if op == "=>":
        return (not a) or b
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    raise ValueError(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# source-level interpreter


@dataclass
class SourceState:
    """Memory of one node instance: one cell per ``pre`` occurrence."""

    first: bool = True
    mem: dict[int, object] = field(default_factory=dict)
    subs: dict[int, "SourceState"] = field(default_factory=dict)


@dataclass
class StepLog:
    unguarded: list[str] = field(default_factory=list)


class Simulator:
    def __init__(self, p: Program):
        self.program = p
        self.nodes = p.node_map
        self._order = {n.name: evaluation_order(n) for n in p.nodes}
        self._index: dict[str, dict[int, int]] = {}
        for n in p.nodes:
            ids: dict[int, int] = {}
            for eq in n.equations:
                for x in subexprs(eq.rhs):
                    if isinstance(x, (Pre, Call)):
                        ids[id(x)] = len(ids)
            self._index[n.name] = ids
        self.log = StepLog()

    def initial_state(self) -> SourceState:
        return SourceState()

    def step(self, node: str, s: SourceState, inputs: dict) -> tuple[dict, SourceState]:
        n = self.nodes[node]
        ids = self._index[node]
        env = dict(inputs)
        new = SourceState(False, {}, {})
        pending: list[Pre] = []

        def ev(e: Expr, guarded: bool):
            if isinstance(e, BoolLit) or isinstance(e, IntLit):
                return e.value
            if isinstance(e, VarRef):
                return env[e.name]
            if isinstance(e, UnOp):
                v = ev(e.arg, guarded)
                return (not v) if e.op == "not" else -v
            if isinstance(e, BinOp):
                return _binop(e.op, ev(e.left, guarded), ev(e.right, guarded))
            if isinstance(e, Ite):
                c, a, b = ev(e.cond, guarded), ev(e.then, guarded), ev(e.else_, guarded)
                return a if c else b
            if isinstance(e, Arrow):
                a = ev(e.init, guarded)
                b = ev(e.step, True)
                return a if s.first else b
            if isinstance(e, Pre):
                pending.append(e)
                k = ids[id(e)]
                if s.first:
                    if not guarded:
                        self.log.unguarded.append(f"{node}: pre at {e.pos}")
                    return default_value(e.ty)
                return s.mem[k]
            if isinstance(e, Call):
                args = [ev(a, guarded) for a in e.args]
                k = ids[id(e)]
                callee = self.nodes[e.node]
                sub = s.subs.get(k) or SourceState()
                outs, new.subs[k] = self.step(e.node, sub, dict(zip((d.name for d in callee.inputs), args)))
                vals = tuple(outs[d.name] for d in callee.outputs)
                return vals[0] if len(vals) == 1 else vals
            if isinstance(e, TupleExpr):
                return tuple(ev(x, guarded) for x in e.items)
            raise TypeError(e)

        for eq in self._order[node]:
            v = ev(eq.rhs, False)
            if len(eq.lhs) == 1:
                env[eq.lhs[0]] = v
            else:
                for name, x in zip(eq.lhs, v):
                    env[name] = x
        # memories take the value of their argument at this instant
        done = 0
        while done < len(pending):
            e = pending[done]
            done += 1
            k = ids[id(e)]
            if k not in new.mem:
                new.mem[k] = ev(e.arg, True)
        return {d.name: env[d.name] for d in n.outputs}, new

    def run(self, inputs: list[dict], node: str | None = None) -> "Trace":
        node = node or self.program.main
        s = self.initial_state()
        steps = []
        for valuation in inputs:
            outs, s = self.step(node, s, valuation)
            steps.append((dict(valuation), outs))
        return Trace(tuple(steps))


# ---------------------------------------------------------------------------
# normalized interpreter


@dataclass
class InstanceState:
    """State of a normalized node instance, keyed like its state signature."""

    values: dict[str, object]
    initialized: bool = False


class NormalizedSimulator:
    def __init__(self, np_: NormalizedProgram):
        self.program = np_
        self.nodes = np_.node_map
        self.states = StateAnalysis(np_)
        self._orders: dict[tuple[str, bool], list] = {}
        self._guard: dict[tuple[str, str], bool] = {}
        self.log = StepLog()

    def _order(self, n: NormalizedNode, initial: bool):
        key = (n.name, initial)
        if key not in self._orders:
            eqs = n.init_eqs if initial else n.trans_eqs
            defs = {v: i for i, e in enumerate(eqs) for v in e.defines}
            graph = {}
            for i, e in enumerate(eqs):
                if isinstance(e, MemDef):
                    reads = []
                elif isinstance(e, SimpleDef):
                    reads = vars_read(e.expr)
                else:
                    reads = [v for a in e.args for v in vars_read(a)]
                graph[i] = {defs[v] for v in reads if v in defs and defs[v] != i}
            self._orders[key] = [eqs[i] for i in TopologicalSorter(graph).static_order()]
        return self._orders[key]

    def initial_state(self, node: str | None = None) -> InstanceState:
        sig = self.states.signature(node or self.program.main)
        return InstanceState({e.flat: default_value(e.ty) for e in sig.entries}, False)

    def step(self, node: str, s: InstanceState, inputs: dict) -> tuple[dict, InstanceState]:
        n = self.nodes[node]
        initial = not s.initialized
        env = dict(inputs)
        mems = [e for e in n.trans_eqs if isinstance(e, MemDef)]
        for m in mems:
            env[m.var] = s.values[m.var]
        new_values: dict[str, object] = {}

        def ev(e: Expr):
            if isinstance(e, (BoolLit, IntLit)):
                return e.value
            if isinstance(e, VarRef):
                return env[e.name]
            if isinstance(e, UnOp):
                v = ev(e.arg)
                return (not v) if e.op == "not" else -v
            if isinstance(e, BinOp):
                return _binop(e.op, ev(e.left), ev(e.right))
            if isinstance(e, Ite):
                return ev(e.then) if ev(e.cond) else ev(e.else_)
            raise TypeError(f"not stateless: {e!r}")

        for eq in self._order(n, initial):
            if isinstance(eq, SimpleDef):
                env[eq.var] = ev(eq.expr)
            elif isinstance(eq, MemDef):
                continue
            else:
                args = [ev(a) for a in eq.args]
                callee = self.nodes[eq.callee]
                prefix = f"u{eq.uid}_{eq.callee}_"
                sub_sig = self.states.signature(eq.callee)
                sub = InstanceState({e.flat: s.values[prefix + e.flat] for e in sub_sig.entries}, s.initialized)
                outs, sub2 = self.step(eq.callee, sub, dict(zip((d.name for d in callee.inputs), args)))
                for k, v in sub2.values.items():
                    new_values[prefix + k] = v
                for name, d in zip(eq.vars, callee.outputs):
                    env[name] = outs[d.name]
        if initial:
            for m in mems:
                if self._reads_memory(n, m.var):
                    self.log.unguarded.append(f"{node}: memory {m.var} read at the first instant")
        for m in mems:
            new_values[m.var] = ev(m.expr)
        return {d.name: env[d.name] for d in n.outputs}, InstanceState(new_values, True)

    def _reads_memory(self, n: NormalizedNode, var: str) -> bool:
        key = (n.name, var)
        if key not in self._guard:
            self._guard[key] = _reads_memory(n, var)
        return self._guard[key]

    def run(self, inputs: list[dict], node: str | None = None) -> "Trace":
        node = node or self.program.main
        s = self.initial_state(node)
        steps = []
        for valuation in inputs:
            outs, s = self.step(node, s, valuation)
            steps.append((dict(valuation), outs))
        return Trace(tuple(steps))


def _reads_memory(n: NormalizedNode, var: str) -> bool:
    for e in n.init_eqs:
        exprs = [e.expr] if isinstance(e, SimpleDef) else list(e.args) if isinstance(e, CallDef) else []
        if any(var in vars_read(x) for x in exprs):
            return True
    return False


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class Trace:
    steps: tuple[tuple[dict, dict], ...]

    def __len__(self):
        return len(self.steps)

    def outputs(self, name: str) -> list:
        return [o[name] for _, o in self.steps]

    def inputs(self) -> list[dict]:
        return [i for i, _ in self.steps]


def step(p: Program, s: SourceState, inputs: dict, node: str | None = None, sim: Simulator | None = None):
    sim = sim or Simulator(p)
    return sim.step(node or p.main, s, inputs)


def run_trace(p: Program, inputs: list[dict]) -> Trace:
    return Simulator(p).run(inputs)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def format_trace(tr: Trace) -> str:
    lines = []
    for k, (ins, outs) in enumerate(tr.steps):
        parts = [f"{n}={_fmt(v)}" for n, v in list(ins.items()) + list(outs.items())]
        lines.append(f"step {k}: " + " ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


_STEP = re.compile(r"^step\s+(\d+)\s*:(.*)$")


def _value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    return int(text)


def parse_trace_text(text: str, node: Node) -> list[dict]:
    """Input valuations from the ``step <k>: var=value ...`` format.

    Variables that are not inputs of ``node`` (outputs) are ignored.
    """
    inputs = {d.name for d in node.inputs}
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _STEP.match(line)
        if not m:
            raise ValueError(f"bad trace line: {line!r}")
        if int(m.group(1)) != len(out):
            raise ValueError(f"trace steps must be numbered from 0 consecutively: {line!r}")
        vals = {}
        for item in m.group(2).split():
            name, _, v = item.partition("=")
            if name in inputs:
                vals[name] = _value(v)
        missing = inputs - vals.keys()
        if missing:
            raise ValueError(f"step {m.group(1)}: missing inputs {', '.join(sorted(missing))}")
        out.append(vals)
    return out


def random_inputs(node: Node, k: int, rng: random.Random, p_true: float = 0.3, lo: int = -4, hi: int = 8) -> list[dict]:
    out = []
    for _ in range(k):
        vals = {}
        for d in node.inputs:
            vals[d.name] = rng.random() < p_true if d.ty == BOOL else rng.randint(lo, hi)
        out.append(vals)
    return out


# ---------------------------------------------------------------------------
# co-simulation against the Horn encoding


@dataclass
class Disagreement:
    trial: int
    direction: str  # "execution-not-derivable" | "derivation-differs"
    inputs: list[dict]
    expected: list[dict]
    note: str = ""


@dataclass
class AgreementReport:
    k: int
    trials: int
    seed: int
    checked_a: int = 0
    checked_b: int = 0
    skipped_b: int = 0
    disagreements: list[Disagreement] = field(default_factory=list)
    note: str = (
        "bounded, randomized check of the simulator against the unrolled Horn "
        "constraints; agreement is evidence, not a proof of bisimulation"
    )

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def to_dict(self) -> dict:
        return {
            "k": self.k, "trials": self.trials, "seed": self.seed,
            "checked_execution_to_derivation": self.checked_a,
            "checked_derivation_to_execution": self.checked_b,
            "skipped_derivation_to_execution": self.skipped_b,
            "disagreements": [d.__dict__ for d in self.disagreements],
            "agreement": self.ok, "note": self.note,
        }


def _smt_value(v) -> str:
    return t.to_smt(t.bool_const(v) if isinstance(v, bool) else t.int_const(v))


def _pins(u, trace: Trace, with_outputs: bool) -> list[str]:
    out = []
    for i, (ins, outs) in enumerate(trace.steps):
        for name, v in ins.items():
            out.append(f"(= {t.to_smt(u.steps[i][name])} {_smt_value(v)})")
        if with_outputs:
            for name, v in outs.items():
                out.append(f"(= {t.to_smt(u.steps[i][name])} {_smt_value(v)})")
    return out


def _differs(u, trace: Trace) -> str:
    diffs = []
    for i, (_, outs) in enumerate(trace.steps):
        for name, v in outs.items():
            diffs.append(f"(not (= {t.to_smt(u.steps[i][name])} {_smt_value(v)}))")
    return "(or " + " ".join(diffs) + ")" if len(diffs) > 1 else (diffs[0] if diffs else "false")


def _check_batch(h: HornSystem, k: int, jobs: list[tuple[str, Trace]], cfg: SolverConfig) -> list[str]:
    """Run each (mode, trace) against the k-step unrolling; return sat/unsat answers."""
    u = unroll(h, k)
    formula = u.formula()
    lines = [f"(declare-fun {t.symbol(n)} () {s})" for n, s in t.free_vars(formula).items()]
    for mv in u.steps:
        for v in mv.values():
            if v.name not in t.free_vars(formula):
                lines.append(f"(declare-fun {t.symbol(v.name)} () {v.sort})")
    lines.append(f"(assert {t.to_smt(formula)})")
    for mode, trace in jobs:
        lines.append("(push 1)")
        for pin in _pins(u, trace, mode == "a"):
            lines.append(f"(assert {pin})")
        if mode == "b":
            lines.append(f"(assert {_differs(u, trace)})")
        lines.append("(check-sat)")
        lines.append("(pop 1)")
    res = run_script("\n".join(lines) + "\n", cfg, tag=f"cosim-k{k}")
    if res is None:
        return ["timeout"] * len(jobs)
    answers = [str(x) for x in parse_all(res[0]) if x in ("sat", "unsat", "unknown")]
    return answers + ["unknown"] * (len(jobs) - len(answers))


def _shortest_failing(h, trace: Trace, mode: str, cfg) -> Trace:
    want = "sat" if mode == "a" else "unsat"
    for k in range(1, len(trace) + 1):
        prefix = Trace(trace.steps[:k])
        if _check_batch(h, k, [(mode, prefix)], cfg)[0] != want:
            return prefix
    return trace


def cosimulate(p: Program, h: HornSystem, k: int, trials: int, seed: int = 0,
               cfg: SolverConfig | None = None) -> AgreementReport:
    """Compare simulator runs with the Horn constraints unrolled ``k`` steps.

    (a) the simulator's execution, inputs and outputs pinned, must be
    derivable; (b) with only the inputs pinned, no derivation may produce
    different outputs. (b) is skipped for runs that read an unguarded ``pre``
    because the encoding deliberately leaves that value open.
    """
    cfg = cfg or SolverConfig()
    report = AgreementReport(k, trials, seed)
    if k <= 0 or trials <= 0:
        return report
    rng = random.Random(seed)
    top = p.top
    jobs: list[tuple[str, Trace]] = []
    owners: list[int] = []
    for trial in range(trials):
        sim = Simulator(p)
        trace = sim.run(random_inputs(top, k, rng))
        jobs.append(("a", trace))
        owners.append(trial)
        if sim.log.unguarded:
            report.skipped_b += 1
        else:
            jobs.append(("b", trace))
            owners.append(trial)
    answers = _check_batch(h, k, jobs, cfg)
    for (mode, trace), trial, ans in zip(jobs, owners, answers):
        want = "sat" if mode == "a" else "unsat"
        if mode == "a":
            report.checked_a += 1
        else:
            report.checked_b += 1
        if ans != want:
            small = _shortest_failing(h, trace, mode, cfg) if ans in ("sat", "unsat") else trace
            report.disagreements.append(Disagreement(
                trial,
                "execution-not-derivable" if mode == "a" else "derivation-differs",
                small.inputs(), [o for _, o in small.steps],
                f"solver answered {ans}",
            ))
            break
    return report


def equal_outputs(a: Trace, b: Trace) -> bool:
    return [o for _, o in a.steps] == [o for _, o in b.steps]


def io_names(h: HornSystem) -> tuple[list[str], list[str]]:
    main = h.relation(h.roles["main"])
    return [p.name for p in main.params if p.role == IN], [p.name for p in main.params if p.role == OUT]
