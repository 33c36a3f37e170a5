"""Command-line driver: compile | verify | reconstruct | minimize | simulate.

Exit codes
    0  success (property valid, reconstruction certified, ...)
    1  frontend error, or an unusable monolithic invariant file
    2  property violated / reconstruction refuted / co-simulation disagreement
    3  inconclusive solver answer (unknown, timeout, unverifiable model)
    4  solver failure (missing executable, crash)

Every report embeds the fully resolved run configuration. Wall-clock data
goes to a separate ``*.timings.json`` so that reports are reproducible.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from lustrehorn import __version__
from lustrehorn.frontend import LustreError, load_program
from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import IN, OUT, HornSystem
from lustrehorn.horn.inline import MonoSignatureError, emit_mono_check, inline
from lustrehorn.horn.render import render_smtlib
from lustrehorn.horn.terms import Definition, TermSyntaxError, definition_from_sexp
from lustrehorn.invariants import (
    SOUND, extract_modular, extract_monolithic, modular_system, reconstruct_modular,
)
from lustrehorn.minimize import CexNotSpurious, PropertyViolated, minimize
from lustrehorn.normalize import normalize_program
from lustrehorn.sexp import SExpError, parse_all
from lustrehorn.simulate import (
    Simulator, Trace, cosimulate, format_trace, parse_trace_text, random_inputs,
)
from lustrehorn.solver import (
    Invalid, Sat, SolverConfig, SolverError, Unknown, Unsat, check_validity,
)
from lustrehorn.unroll import unroll

EXIT_OK, EXIT_FRONTEND, EXIT_VIOLATED, EXIT_INCONCLUSIVE, EXIT_SOLVER = 0, 1, 2, 3, 4

log = logging.getLogger("lustrehorn")


@dataclass(frozen=True)
class RunConfig:
    input: str
    command: str
    dialect: str
    solver: str
    solver_args: tuple[str, ...]
    timeout: float
    seed: int
    out: str
    verbose: int
    main: str | None = None

    def solver_config(self) -> SolverConfig:
        return SolverConfig(path=self.solver, args=self.solver_args, timeout=self.timeout,
                            dialect=self.dialect)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solver_args"] = list(self.solver_args)
        d["version"] = __version__
        return d

    @property
    def stem(self) -> str:
        return Path(self.input).stem

    def path(self, suffix: str) -> Path:
        return Path(self.out) / f"{self.stem}{suffix}"


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    env = SolverConfig.from_env()
    solver = ns.solver or env.path
    args = tuple(ns.solver_args.split()) if ns.solver_args else env.args
    timeout = ns.timeout if ns.timeout is not None else env.timeout
    out = ns.out or str(Path("lustrehorn-out") / Path(ns.input).stem)
    return RunConfig(ns.input, ns.command, ns.dialect, solver, args, float(timeout),
                     ns.seed, out, ns.verbose, ns.main)


# ---------------------------------------------------------------------------
# output helpers


def _write(cfg: RunConfig, suffix: str, text: str) -> Path:
    p = cfg.path(suffix)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    log.info("wrote %s", p)
    return p


def _write_json(cfg: RunConfig, suffix: str, data: dict) -> Path:
    return _write(cfg, suffix, json.dumps(data, indent=2) + "\n")


def _timings(cfg: RunConfig, entries: dict) -> None:
    _write_json(cfg, ".timings.json", {k: round(v, 4) if isinstance(v, float) else v
                                       for k, v in entries.items()})


def _load(cfg: RunConfig, json_diag: bool):
    src = Path(cfg.input).read_text()
    try:
        return load_program(src, cfg.main)
    except LustreError as exc:
        err = exc.with_file(cfg.input)
        for d in err.diagnostics:
            print(d.to_json() if json_diag else str(d), file=sys.stderr)
        return None


def _bmc_inputs(h: HornSystem, scfg: SolverConfig, limit: int = 40) -> tuple[list[dict], list[dict]] | None:
    """A shortest input/output sequence reaching the query, by unrolling."""
    for k in range(1, limit + 1):
        u = unroll(h, k)
        res = check_validity(t.not_(t.and_(u.formula(), u.bad)), scfg)
        if isinstance(res, Invalid):
            model = res.countermodel or {}
            # variables the solver left unassigned are don't-cares
            val = lambda v: model.get(v.name, False if v.sort == "Bool" else 0)
            ins = [{n: val(v) for n, v in u.io(i, IN).items()} for i in range(k)]
            outs = [{n: val(v) for n, v in u.io(i, OUT).items()} for i in range(k)]
            return ins, outs
    return None


def counterexample_trace(h: HornSystem, verdict: Sat, scfg: SolverConfig) -> Trace | None:
    """Input/output steps of a counterexample, from Main facts or by unrolling.

    Systems without a Main relation (the mono-check rules) have no execution
    to replay: their counterexample is a single non-inductive step.
    """
    if h.roles.get("main") not in h.relation_map:
        return None
    main = h.relation(h.roles["main"])
    facts = verdict.trace.of(main.name) if verdict.trace is not None else []
    if facts:
        steps = []
        for f in facts:
            vals = dict(zip((p.name for p in main.params), f.values))
            steps.append(({p.name: vals[p.name] for p in main.params if p.role == IN},
                          {p.name: vals[p.name] for p in main.params if p.role == OUT}))
        return Trace(tuple(steps))
    found = _bmc_inputs(h, scfg)
    if found is None:
        return None
    return Trace(tuple(zip(*found)))


def _sat_report(cfg: RunConfig, h: HornSystem, v: Sat, what: str) -> None:
    tr = counterexample_trace(h, v, cfg.solver_config())
    lines = [f"# {what}"]
    if v.trace is not None:
        lines += [f"# {f}" for f in v.trace.facts]
    if tr is not None:
        body = format_trace(tr)
    elif "mono" in h.roles:
        body = "# counterexample to induction; the facts above are the offending step\n"
    else:
        body = "# no input trace recovered\n"
    text = "\n".join(lines) + "\n" + body
    p = _write(cfg, ".trace.txt", text)
    print(f"{what}; trace written to {p}")


def _inconclusive(v) -> int:
    reason = v.reason if isinstance(v, Unknown) else f"timeout after {v.seconds:g} s"
    print(f"inconclusive: {reason}", file=sys.stderr)
    return EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------
# subcommands


def cmd_compile(cfg: RunConfig, ns) -> int:
    p = _load(cfg, ns.json_diagnostics)
    if p is None:
        return EXIT_FRONTEND
    h = modular_system(normalize_program(p))
    _write(cfg, ".modular.smt2", render_smtlib(h, cfg.dialect))
    if ns.inline:
        _write(cfg, ".mono.smt2", render_smtlib(inline(h).horn(), cfg.dialect))
    print(f"{cfg.stem}: {len(h.relations)} relations, {len(h.rules)} rules -> {cfg.out}")
    return EXIT_OK


def _mono_text(d: Definition) -> str:
    return d.to_smt() + "\n"


def cmd_verify(cfg: RunConfig, ns) -> int:
    p = _load(cfg, ns.json_diagnostics)
    if p is None:
        return EXIT_FRONTEND
    scfg = cfg.solver_config()
    h = modular_system(normalize_program(p))
    _write(cfg, ".modular.smt2", render_smtlib(h, cfg.dialect))
    res = extract_modular(p, scfg, name=cfg.stem, h=h)
    v = res.verdict
    timings = {"modular": getattr(v, "seconds", 0.0)}
    if isinstance(v, Sat):
        _timings(cfg, timings)
        _sat_report(cfg, h, v, "property violated")
        return EXIT_VIOLATED
    if not isinstance(v, Unsat):
        _timings(cfg, timings)
        return _inconclusive(v)
    report = res.report
    report.config = cfg.to_dict()
    _write(cfg, ".invariants.json", report.to_json())
    if ns.inline:
        mres = extract_monolithic(p, scfg, name=cfg.stem, h=h)
        timings["monolithic"] = getattr(mres.verdict, "seconds", 0.0)
        if mres.mono is not None:
            _write(cfg, ".mono.smt2", render_smtlib(inline(h).horn(), cfg.dialect))
            _write(cfg, ".mono-invariant.smt2", _mono_text(mres.mono))
    _timings(cfg, timings)
    print(report.pretty(), end="")
    if report.status != SOUND:
        print(f"model validation: {report.status}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    print("property valid")
    return EXIT_OK


def read_mono(text: str, h: HornSystem) -> Definition:
    """A ``define-fun`` (or a bare Boolean term over Main's parameter names)."""
    forms = parse_all(text)
    if not forms:
        raise ValueError("empty monolithic invariant file")
    main = h.relation(h.roles["main"])
    defs = [f for f in forms if isinstance(f, list) and f and str(f[0]) == "define-fun"]
    if defs:
        return definition_from_sexp(defs[-1])
    body = t.from_sexp(forms[-1], {p.name: p.var for p in main.params})
    return Definition("MONO", tuple(p.var for p in main.params), body)


def cmd_reconstruct(cfg: RunConfig, ns) -> int:
    p = _load(cfg, ns.json_diagnostics)
    if p is None:
        return EXIT_FRONTEND
    scfg = cfg.solver_config()
    h = modular_system(normalize_program(p))
    timings = {}
    if ns.mono:
        try:
            mono = read_mono(Path(ns.mono).read_text(), h)
        except (SExpError, TermSyntaxError, ValueError) as exc:
            print(f"{ns.mono}: cannot read monolithic invariant: {exc}", file=sys.stderr)
            return EXIT_FRONTEND
    else:
        mres = extract_monolithic(p, scfg, name=cfg.stem, h=h)
        timings["monolithic"] = getattr(mres.verdict, "seconds", 0.0)
        if isinstance(mres.verdict, Sat):
            _sat_report(cfg, h, mres.verdict, "property violated")
            return EXIT_VIOLATED
        if mres.mono is None:
            return _inconclusive(mres.verdict)
        mono = mres.mono
        _write(cfg, ".mono-invariant.smt2", _mono_text(mono))
    try:
        hc = emit_mono_check(mono, h)
    except MonoSignatureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FRONTEND
    _write(cfg, ".monocheck.smt2", render_smtlib(hc, cfg.dialect))
    res = reconstruct_modular(mono, h, scfg, name=cfg.stem, retry_with_property=ns.retry_with_property)
    v = res.verdict
    timings["monocheck"] = getattr(v, "seconds", 0.0)
    _timings(cfg, timings)
    if isinstance(v, Sat):
        _sat_report(cfg, res.system, v, "monolithic invariant is not inductive for the modular system")
        return EXIT_VIOLATED
    if not isinstance(v, Unsat):
        return _inconclusive(v)
    report = res.report
    report.config = cfg.to_dict()
    _write(cfg, ".invariants.json", report.to_json())
    print(report.pretty(), end="")
    return EXIT_OK if report.status == SOUND else EXIT_INCONCLUSIVE


def cmd_minimize(cfg: RunConfig, ns) -> int:
    p = _load(cfg, ns.json_diagnostics)
    if p is None:
        return EXIT_FRONTEND
    scfg = cfg.solver_config()
    h = modular_system(normalize_program(p))
    try:
        r = minimize(h, scfg, max_iter=ns.max_iter, name=cfg.stem)
    except PropertyViolated as exc:
        _sat_report(cfg, h, exc.verdict, "property violated; nothing to minimize")
        return EXIT_VIOLATED
    except CexNotSpurious as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATED
    except RuntimeError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    data = r.to_dict(h)
    timings = {"solver_seconds": data.pop("solver_seconds")}
    data["config"] = cfg.to_dict()
    _write(cfg, ".minimized.smt2", render_smtlib(r.system, cfg.dialect))
    _write_json(cfg, ".minimize.json", data)
    if r.report is not None:
        r.report.config = cfg.to_dict()
        _write(cfg, ".invariants.json", r.report.to_json())
    _timings(cfg, timings)
    for w in r.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for row in r.rows:
        print(f"{row.relation:24s} {row.original_rank} -> {row.final_rank}  {' '.join(row.final) or '-'}")
    print(f"rank {r.original_rank} -> {r.final_rank}"
          + ("" if r.reduced else " (no reduction)") + f" after {r.iterations} iteration(s)")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, ns) -> int:
    p = _load(cfg, ns.json_diagnostics)
    if p is None:
        return EXIT_FRONTEND
    if ns.check_bisim:
        k, trials = ns.check_bisim
        h = modular_system(normalize_program(p))
        rep = cosimulate(p, h, k, trials, cfg.seed, cfg.solver_config())
        data = dict(rep.to_dict(), config=cfg.to_dict())
        _write_json(cfg, ".bisim.json", data)
        print(f"co-simulation k={k} trials={trials}: "
              + ("agreement" if rep.ok else f"{len(rep.disagreements)} disagreement(s)"))
        return EXIT_OK if rep.ok else EXIT_VIOLATED
    top = p.top
    if ns.inputs:
        try:
            inputs = parse_trace_text(Path(ns.inputs).read_text(), top)
        except ValueError as exc:
            print(f"{ns.inputs}: {exc}", file=sys.stderr)
            return EXIT_FRONTEND
        if ns.k is not None:
            inputs = inputs[:ns.k]
    else:
        inputs = random_inputs(top, 10 if ns.k is None else ns.k, random.Random(cfg.seed))
    tr = Simulator(p).run(inputs)
    text = format_trace(tr)
    _write(cfg, ".trace.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "compile": cmd_compile,
    "verify": cmd_verify,
    "reconstruct": cmd_reconstruct,
    "minimize": cmd_minimize,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--solver", help="solver executable (default: z3, or $LUSTREHORN_SOLVER)")
    g.add_argument("--solver-args", help="argument template; {file} is the script path")
    g.add_argument("--timeout", type=float, help="seconds per solver call (default 60)")
    g.add_argument("--dialect", choices=("rule", "horn"), default="rule")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output directory (default lustrehorn-out/<input stem>)")
    g.add_argument("--main", help="top node (default: the uncalled node)")
    g.add_argument("--json-diagnostics", action="store_true", help="frontend errors as JSON lines")
    g.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="lustrehorn", description="Lustre to Horn clauses, with invariants.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", parents=[common], help="emit modular Horn clauses")
    c.add_argument("--inline", action="store_true", help="also emit the inlined system")
    v = sub.add_parser("verify", parents=[common], help="check the property, extract invariants")
    v.add_argument("--inline", action="store_true", help="also extract a monolithic invariant")
    r = sub.add_parser("reconstruct", parents=[common], help="node invariants from a monolithic one")
    r.add_argument("--mono", help="file with a define-fun over the top node's signature")
    r.add_argument("--retry-with-property", action="store_true",
                   help="on failure, retry with the property conjoined")
    m = sub.add_parser("minimize", parents=[common], help="shrink state signatures")
    m.add_argument("--max-iter", type=int, default=None)
    s = sub.add_parser("simulate", parents=[common], help="run the reference interpreter")
    s.add_argument("-k", type=int, default=None, help="number of steps (default 10)")
    s.add_argument("--inputs", help="input trace file, 'step <k>: x=v ...' per line")
    s.add_argument("--check-bisim", nargs=2, type=int, metavar=("K", "TRIALS"),
                   help="co-simulate against the Horn encoding instead")
    for sp in (c, v, r, m, s):
        sp.add_argument("input", help="Lustre source file")
    return ap


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(message)s")
    cfg = resolve_config(ns)
    if not Path(cfg.input).is_file():
        print(f"{cfg.input}: no such file", file=sys.stderr)
        return EXIT_FRONTEND
    try:
        return COMMANDS[cfg.command](cfg, ns)
    except LustreError as exc:
        for d in exc.with_file(cfg.input).diagnostics:
            print(d.to_json() if ns.json_diagnostics else str(d), file=sys.stderr)
        return EXIT_FRONTEND
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
