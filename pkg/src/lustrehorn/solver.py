"""Driving an external Horn/SMT solver and reading its answers back.

The solver is a separate executable (z3 by default) invoked on a script file.
Nothing here links against solver libraries.
"""

from __future__ import annotations

import logging
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import HornSystem
from lustrehorn.horn.render import render_smtlib
from lustrehorn.horn.terms import Definition, Term, TermSyntaxError, Var
from lustrehorn.sexp import Quoted, SExpError, dumps, parse_all

log = logging.getLogger(__name__)

# Spacer slices and inlines relations away by default, after which the
# certificate only covers what survived. Keep every declared relation.
RULE_PREAMBLE = (
    "(set-option :fp.engine spacer)",
    "(set-option :fp.xform.slice false)",
    "(set-option :fp.xform.inline_linear false)",
    "(set-option :fp.xform.inline_eager false)",
    "(set-option :fp.print_certificate true)",
)

InvariantMap = dict  # relation name -> Definition


@dataclass(frozen=True)
class SolverConfig:
    path: str = "z3"
    args: tuple[str, ...] = ("-smt2", "{file}")
    interactive_args: tuple[str, ...] = ("-in", "-smt2")
    timeout: float = 60.0
    dialect: str = "rule"
    retry_alternate: bool = True
    transcript_dir: str | None = None

    @classmethod
    def from_env(cls, **overrides) -> "SolverConfig":
        env = {}
        if "LUSTREHORN_SOLVER" in os.environ:
            env["path"] = os.environ["LUSTREHORN_SOLVER"]
        if "LUSTREHORN_SOLVER_ARGS" in os.environ:
            env["args"] = tuple(os.environ["LUSTREHORN_SOLVER_ARGS"].split())
        if "LUSTREHORN_TIMEOUT" in os.environ:
            env["timeout"] = float(os.environ["LUSTREHORN_TIMEOUT"])
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)


class SolverError(RuntimeError):
    """The solver could not be run, or died without giving an answer."""


@dataclass(frozen=True)
class Fact:
    rel: str
    values: tuple

    def __str__(self):
        return f"{self.rel}({', '.join(_show(v) for v in self.values)})"


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass(frozen=True)
class CounterexampleTrace:
    """Derived ground facts in derivation order; the last one is the error."""

    facts: tuple[Fact, ...]

    def of(self, rel: str) -> list[Fact]:
        return [f for f in self.facts if f.rel == rel]

    def __len__(self):
        return len(self.facts)


@dataclass(frozen=True)
class Unsat:
    model: dict = field(default_factory=dict)
    raw: str = ""
    seconds: float = 0.0
    name = "unsat"


@dataclass(frozen=True)
class Sat:
    trace: CounterexampleTrace | None = None
    raw: str = ""
    seconds: float = 0.0
    name = "sat"


@dataclass(frozen=True)
class Unknown:
    reason: str
    raw: str = ""
    seconds: float = 0.0
    name = "unknown"


@dataclass(frozen=True)
class Timeout:
    seconds: float
    raw: str = ""
    name = "timeout"


SolverVerdict = Union[Unsat, Sat, Unknown, Timeout]


# ---------------------------------------------------------------------------
# running the executable


def _resolve(path: str) -> str:
    found = shutil.which(path)
    if found is None:
        raise SolverError(f"solver executable not found: {path!r}")
    return found


def run_script(script: str, cfg: SolverConfig, tag: str = "query") -> tuple[str, float] | None:
    """Run ``script``; return ``(stdout, seconds)``, or None on timeout."""
    exe = _resolve(cfg.path)
    with tempfile.TemporaryDirectory(prefix="lustrehorn-") as tmp:
        file = Path(tmp) / f"{tag}.smt2"
        file.write_text(script)
        argv = [exe] + [a.replace("{file}", str(file)) for a in cfg.args]
        start = time.monotonic()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=cfg.timeout)
        except subprocess.TimeoutExpired:
            _keep_transcript(cfg, tag, script, "timeout\n")
            return None
        except OSError as exc:
            raise SolverError(f"cannot run solver: {exc}") from exc
        elapsed = time.monotonic() - start
    out = proc.stdout
    _keep_transcript(cfg, tag, script, out + proc.stderr)
    first = out.strip().split("\n", 1)[0].strip() if out.strip() else ""
    if first == "timeout":
        return None
    if first not in ("sat", "unsat", "unknown") and proc.returncode != 0:
        raise SolverError(f"solver exited with status {proc.returncode}: {(out + proc.stderr).strip()[:500]}")
    return out, elapsed


def _keep_transcript(cfg: SolverConfig, tag: str, script: str, output: str) -> None:
    if not cfg.transcript_dir:
        return
    d = Path(cfg.transcript_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{tag}.smt2").write_text(script)
    (d / f"{tag}.out").write_text(output)


# ---------------------------------------------------------------------------
# s-expression helpers


def expand_lets(sx, env: Mapping[str, object] | None = None):
    """Inline every ``let`` (respecting shadowing by let and quantifiers)."""
    env = dict(env or {})
    if isinstance(sx, list):
        if not sx:
            return sx
        head = sx[0]
        if head == "let" and not isinstance(head, Quoted) and len(sx) == 3:
            new = dict(env)
            for name, value in sx[1]:
                new[str(name)] = expand_lets(value, env)
            return expand_lets(sx[2], new)
        if head in ("forall", "exists") and len(sx) == 3:
            inner = {k: v for k, v in env.items() if k not in {str(b[0]) for b in sx[1]}}
            return [head, sx[1], expand_lets(sx[2], inner)]
        return [expand_lets(x, env) for x in sx]
    if isinstance(sx, str) and sx in env:
        return env[sx]
    return sx


def _literal(sx):
    if sx == "true":
        return True
    if sx == "false":
        return False
    if isinstance(sx, list) and len(sx) == 2 and sx[0] == "-":
        v = _literal(sx[1])
        return -v if isinstance(v, int) and not isinstance(v, bool) else None
    if isinstance(sx, str) and not isinstance(sx, Quoted) and sx.isdigit():
        return int(sx)
    return None


def _strip_annotation(sx):
    while isinstance(sx, list) and sx and sx[0] == "!":
        sx = sx[1]
    return sx


# ---------------------------------------------------------------------------
# models


def _rename_to(d: Definition, params: Iterable[Var]) -> Definition:
    params = tuple(params)
    if tuple(p.sort for p in params) != d.sorts:
        raise TermSyntaxError(f"sort mismatch in model for {d.name}")
    body = t.substitute(d.body, {old.name: new for old, new in zip(d.params, params)})
    return Definition(d.name, params, body)


def _certificate_entry(sx, relations: Mapping[str, int]) -> Definition | None:
    sx = _strip_annotation(sx)
    binders = []
    if isinstance(sx, list) and sx and sx[0] == "forall":
        binders = sx[1]
        sx = _strip_annotation(sx[2])
    scope = {str(b[0]): Var(str(b[0]), str(b[1])) for b in binders}
    if isinstance(sx, str) and str(sx) in relations:
        return Definition(str(sx), (), t.TRUE)
    if isinstance(sx, list) and len(sx) == 2 and sx[0] == "not" and str(sx[1]) in relations:
        return Definition(str(sx[1]), (), t.FALSE)
    if not (isinstance(sx, list) and len(sx) == 3 and sx[0] == "="):
        return None
    lhs, rhs = sx[1], sx[2]
    if isinstance(lhs, str) and str(lhs) in relations:
        body = t.from_sexp(rhs, scope)
        return Definition(str(lhs), (), body)
    if not (isinstance(lhs, list) and lhs and str(lhs[0]) in relations):
        return None
    name = str(lhs[0])
    args = [t.from_sexp(a, scope) for a in lhs[1:]]
    body = t.from_sexp(rhs, scope)
    params: list[Var] = []
    extra: list[Term] = []
    for k, a in enumerate(args):
        if isinstance(a, Var) and a not in params:
            params.append(a)
        else:
            p = Var(f"x!{k}", t.sort_of(a))
            params.append(p)
            extra.append(t.eq(p, a))
    if extra:
        body = t.and_(*extra, body)
    return Definition(name, tuple(params), body)


def parse_model(raw: str, h: HornSystem | None = None) -> InvariantMap:
    """Read a certificate (rule dialect) or a ``get-model`` block (horn dialect).

    With ``h`` given, parameters are renamed to the declared parameter names
    and relations missing from the answer are interpreted as ``true``.
    """
    relations = {r.name: r.arity for r in h.relations} if h is not None else None
    items = parse_all(raw)
    if items and items[0] in ("sat", "unsat"):
        items = items[1:]
    model: dict[str, Definition] = {}
    for item in items:
        if isinstance(item, list) and item and item[0] == "error":
            continue
        if isinstance(item, list) and item and item[0] == "define-fun":
            item = [item]
        if isinstance(item, list) and all(isinstance(x, list) and x and x[0] == "define-fun" for x in item):
            for df in item:
                d = t.definition_from_sexp(df, relations={}, definitions={})
                model[d.name] = d
            continue
        cert = expand_lets(item)
        conj = cert[1:] if isinstance(cert, list) and cert and cert[0] == "and" else [cert]
        rels = relations if relations is not None else _guess_relations(conj)
        for c in conj:
            d = _certificate_entry(c, rels)
            if d is None:
                raise TermSyntaxError(f"unrecognised certificate entry: {dumps(c)[:200]}")
            model[d.name] = d
    if h is not None:
        out = {}
        for r in h.relations:
            if r.name in model:
                out[r.name] = _rename_to(model[r.name], (p.var for p in r.params))
            elif r.name != h.query:
                log.warning("no interpretation for %s in the solver answer; using true", r.name)
                out[r.name] = Definition(r.name, tuple(p.var for p in r.params), t.TRUE)
        return out
    return model


def _guess_relations(conj) -> dict[str, int]:
    rels = {}
    for c in conj:
        c = _strip_annotation(c)
        if isinstance(c, list) and c and c[0] == "forall":
            c = _strip_annotation(c[2])
        if isinstance(c, list) and len(c) == 3 and c[0] == "=":
            lhs = c[1]
            if isinstance(lhs, list) and lhs:
                rels[str(lhs[0])] = len(lhs) - 1
            elif isinstance(lhs, str):
                rels[str(lhs)] = 0
    return rels


# ---------------------------------------------------------------------------
# counterexample traces


def parse_trace(raw: str, relations: Iterable[str] | None = None) -> CounterexampleTrace:
    """Ground conclusions of the hyper-resolution proof, premises first."""
    rels = set(relations) if relations is not None else None
    items = parse_all(raw)
    if items and items[0] == "sat":
        items = items[1:]
    facts: list[Fact] = []

    def fact(sx) -> Fact | None:
        if isinstance(sx, str):
            name = str(sx)
            if (rels is None and name == "Error") or (rels is not None and name in rels):
                return Fact(name, ())
            return None
        if not (isinstance(sx, list) and sx and isinstance(sx[0], str)):
            return None
        name = str(sx[0])
        if rels is not None and name not in rels:
            return None
        vals = tuple(_literal(a) for a in sx[1:])
        if any(v is None for v in vals):
            return None
        return Fact(name, vals)

    def go(sx):
        if not isinstance(sx, list) or not sx:
            return
        head = sx[0]
        if head == "asserted":
            return
        if isinstance(head, list) and head[:2] == ["_", "hyper-res"]:
            for prem in sx[1:-1]:
                go(prem)
            f = fact(sx[-1])
            if f is not None:
                facts.append(f)
            return
        for x in sx[1:]:
            go(x)

    for item in items:
        go(expand_lets(item))
    return CounterexampleTrace(tuple(facts))


# ---------------------------------------------------------------------------
# solving Horn systems


def _script(h: HornSystem | str, dialect: str) -> str:
    text = h if isinstance(h, str) else render_smtlib(h, dialect)
    if dialect == "rule":
        return "\n".join(RULE_PREAMBLE) + "\n" + text
    return text


def _classify(out: str, seconds: float, dialect: str, h: HornSystem | None) -> SolverVerdict:
    body = out.strip()
    first, _, rest = body.partition("\n")
    first = first.strip()
    reachable = {"rule": "sat", "horn": "unsat"}[dialect]
    unreachable = {"rule": "unsat", "horn": "sat"}[dialect]
    if first == unreachable:
        try:
            return Unsat(parse_model(rest, h), out, seconds)
        except (SExpError, ValueError) as exc:
            return Unknown(f"unparseable model: {exc}", out, seconds)
    if first == reachable:
        trace = None
        if dialect == "rule":
            try:
                trace = parse_trace(rest, [r.name for r in h.relations] if h is not None else None)
            except (SExpError, ValueError):
                trace = None
        return Sat(trace, out, seconds)
    if first == "unknown":
        return Unknown(rest.strip() or "solver answered unknown", out, seconds)
    return Unknown(f"no verdict in solver output: {body[:200]}", out, seconds)


def solve(h: HornSystem | str, cfg: SolverConfig | None = None, tag: str = "horn") -> SolverVerdict:
    """Decide reachability of the query. Unsat means the query is unreachable."""
    cfg = cfg or SolverConfig()
    dialect = cfg.dialect
    res = run_script(_script(h, dialect), cfg, tag)
    if res is None:
        return Timeout(cfg.timeout)
    system = h if isinstance(h, HornSystem) else None
    verdict = _classify(res[0], res[1], dialect, system)
    if isinstance(verdict, Unknown) and cfg.retry_alternate and system is not None:
        other = "horn" if dialect == "rule" else "rule"
        log.info("solver answered unknown in %s dialect; retrying in %s", dialect, other)
        res = run_script(_script(system, other), cfg, tag + "-retry")
        if res is None:
            return Timeout(cfg.timeout)
        retry = _classify(res[0], res[1], other, system)
        if not isinstance(retry, Unknown):
            return retry
    return verdict


# ---------------------------------------------------------------------------
# validity


@dataclass(frozen=True)
class Valid:
    name = "valid"


@dataclass(frozen=True)
class Invalid:
    countermodel: dict
    name = "invalid"


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    name = "inconclusive"


ValidityResult = Union[Valid, Invalid, Inconclusive]


def _declarations(fs: Iterable[Term], definitions: Iterable[Definition]) -> tuple[list[str], dict[str, str]]:
    defs = list(definitions)
    lines = [d.to_smt() for d in defs]
    vs: dict[str, str] = {}
    for f in fs:
        for name, sort in t.free_vars(f).items():
            if vs.setdefault(name, sort) != sort:
                raise TermSyntaxError(f"variable {name!r} used with sorts {vs[name]} and {sort}")
    decls = [f"(declare-fun {t.symbol(n)} () {s})" for n, s in vs.items()]
    return decls + lines, vs


def check_validity_many(
    fs: list[Term],
    cfg: SolverConfig | None = None,
    definitions: Iterable[Definition] = (),
    tag: str = "validity",
) -> list[ValidityResult]:
    """Decide validity of each formula (free variables universally read)."""
    cfg = cfg or SolverConfig()
    if not fs:
        return []
    lines = []
    # each formula is checked in its own scope so variable sorts cannot clash
    for f in fs:
        decls, _ = _declarations([f], definitions)
        lines.append("(push 1)")
        lines.extend(decls)
        lines.append(f"(assert (not {t.to_smt(f)}))")
        lines.append("(check-sat)")
        lines.append("(get-model)")
        lines.append("(pop 1)")
    res = run_script("\n".join(lines) + "\n", cfg, tag)
    if res is None:
        return [Inconclusive("timeout")] * len(fs)
    items = parse_all(res[0])
    results: list[ValidityResult] = []
    k = 0
    while k < len(items) and len(results) < len(fs):
        v = items[k]
        nxt = items[k + 1] if k + 1 < len(items) else None
        if v == "unsat":
            results.append(Valid())
        elif v == "sat":
            results.append(Invalid(_model_values(nxt)))
        elif v == "unknown":
            results.append(Inconclusive("solver answered unknown"))
        else:
            k += 1
            continue
        k += 2 if isinstance(nxt, list) else 1
    while len(results) < len(fs):
        results.append(Inconclusive("no answer from solver"))
    return results


def check_validity(f: Term, cfg: SolverConfig | None = None, definitions: Iterable[Definition] = ()) -> ValidityResult:
    return check_validity_many([f], cfg, definitions)[0]


def _model_values(sx) -> dict:
    out = {}
    if not isinstance(sx, list):
        return out
    for df in sx:
        if isinstance(df, list) and len(df) == 5 and df[0] == "define-fun" and df[2] == []:
            v = _literal(df[4])
            out[str(df[1])] = v if v is not None else dumps(df[4])
    return out


# ---------------------------------------------------------------------------
# interactive sessions (incremental checks with assumptions)


class Session:
    """A long-running solver process fed commands over standard input."""

    def __init__(self, cfg: SolverConfig | None = None):
        self.cfg = cfg or SolverConfig()
        exe = _resolve(self.cfg.path)
        self.proc = subprocess.Popen(
            [exe] + list(self.cfg.interactive_args),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        self.send("(set-option :print-success false)")
        self.send(f"(set-option :timeout {int(self.cfg.timeout * 1000)})")

    def send(self, command: str) -> None:
        self.proc.stdin.write(command + "\n")
        self.proc.stdin.flush()

    def _read_sexp(self) -> str:
        buf, depth = [], 0
        while True:
            line = self.proc.stdout.readline()
            if not line:
                raise SolverError("solver process ended unexpectedly")
            buf.append(line)
            depth += line.count("(") - line.count(")")
            if depth <= 0 and "".join(buf).strip():
                return "".join(buf).strip()

    def check(self, assumptions: Iterable[str] = ()) -> str:
        names = " ".join(assumptions)
        self.send(f"(check-sat-assuming ({names}))" if names else "(check-sat)")
        answer = self._read_sexp()
        if answer.startswith("(error"):
            raise SolverError(answer)
        return answer

    def unsat_core(self) -> list[str]:
        self.send("(get-unsat-core)")
        sx = parse_all(self._read_sexp())
        return [str(x) for x in (sx[0] if sx else [])]

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.send("(exit)")
                self.proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
