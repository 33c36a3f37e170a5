"""Invariant synthesis pipelines and model validation.

``extract_modular`` solves the modular system directly. ``extract_monolithic``
solves the inlined system and returns the invariant of Main.
``reconstruct_modular`` takes such a monolithic invariant and asks the solver
for node-level invariants that justify it. ``validate`` checks any candidate
model by substituting it into every rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

from lustrehorn.frontend.ast import Program
from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import Encoding, HornSystem, Rule
from lustrehorn.horn.inline import MonolithicSystem, emit_mono_check, inline
from lustrehorn.horn.terms import App, Definition, Term
from lustrehorn.normalize import NormalizedProgram, normalize_program
from lustrehorn.solver import (
    Inconclusive, Invalid, Sat, SolverConfig, Timeout, Unknown, Unsat, check_validity_many, solve,
)

SOUND, UNSOUND, UNVERIFIED = "sound", "unsound", "unverified"
DIRECT, RECONSTRUCTED = "direct", "reconstructed"


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class RuleFailure:
    rule: str
    countermodel: dict | None = None
    reason: str = ""


@dataclass(frozen=True)
class Validation:
    status: str
    failures: tuple[RuleFailure, ...] = ()


def rule_obligation(rule: Rule, model: dict[str, Definition], h: HornSystem) -> Term:
    """``body => head`` with every relation replaced by its interpretation."""
    defs = {d.name: d for d in h.definitions}
    defs.update(model)

    def interp(a: App):
        if a.rel == h.query and a.rel not in model:
            return t.FALSE
        d = defs.get(a.rel)
        if d is None:
            return t.TRUE
        return d.apply(a.args)

    body = t.expand_apps(rule.body, interp)
    head = interp(rule.head)
    return t.implies(body, head)


def validate(model: dict[str, Definition], h: HornSystem, cfg: SolverConfig | None = None) -> Validation:
    """Each rule of ``h`` must be valid once the model is substituted."""
    obligations = [rule_obligation(r, model, h) for r in h.rules]
    results = check_validity_many(obligations, cfg, tag="validate")
    failures = []
    status = SOUND
    for rule, res in zip(h.rules, results):
        if isinstance(res, Invalid):
            failures.append(RuleFailure(rule.label, res.countermodel, "implication does not hold"))
            status = UNSOUND
        elif isinstance(res, Inconclusive):
            failures.append(RuleFailure(rule.label, None, res.reason))
            if status == SOUND:
                status = UNVERIFIED
    return Validation(status, tuple(failures))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class RelationInvariant:
    relation: str
    node: str | None
    kind: str
    definition: Definition

    def to_dict(self) -> dict:
        return {
            "relation": self.relation,
            "node": self.node,
            "kind": self.kind,
            "params": [{"name": p.name, "sort": p.sort} for p in self.definition.params],
            "formula": t.to_smt(self.definition.body),
        }


@dataclass
class ModularInvariantReport:
    program: str
    provenance: str
    entries: list[RelationInvariant]
    validation: Validation
    main: Definition | None = None
    solver_seconds: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return self.validation.status

    def entry(self, relation: str) -> RelationInvariant:
        for e in self.entries:
            if e.relation == relation:
                return e
        raise KeyError(relation)

    def model(self) -> dict[str, Definition]:
        return {e.relation: e.definition for e in self.entries}

    def to_dict(self) -> dict:
        return {
            "program": self.program,
            "provenance": self.provenance,
            "status": self.status,
            "relations": [dict(e.to_dict(), provenance=self.provenance, status=self.status) for e in self.entries],
            "main_invariant": None if self.main is None else t.to_smt(self.main.body),
            "failures": [
                {"rule": f.rule, "reason": f.reason, "countermodel": f.countermodel}
                for f in self.validation.failures
            ],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def pretty(self) -> str:
        lines = [f"{self.program}: {self.provenance} invariants, {self.status}"]
        for e in self.entries:
            d = e.definition
            head = f"{e.relation}({', '.join(p.name for p in d.params)})"
            parts = t.conjuncts(d.body) or [t.TRUE]
            lines.append(f"  {head} =")
            for k, c in enumerate(parts):
                lines.append(f"      {'  ' if k == 0 else '& '}{t.to_smt(c)}")
        for f in self.validation.failures:
            lines.append(f"  rule {f.rule}: {f.reason} {f.countermodel or ''}".rstrip())
        return "\n".join(lines) + "\n"


def _entries(model: dict[str, Definition], h: HornSystem, kinds=("trans", "init", "main")) -> list[RelationInvariant]:
    out = []
    for r in h.relations:
        if r.kind in kinds and r.name in model:
            out.append(RelationInvariant(r.name, r.node, r.kind, model[r.name]))
    return out


# ---------------------------------------------------------------------------
# pipelines


@dataclass
class PipelineResult:
    verdict: Union[Unsat, Sat, Unknown, Timeout]
    system: HornSystem
    report: ModularInvariantReport | None = None
    mono: Definition | None = None

    @property
    def ok(self) -> bool:
        return isinstance(self.verdict, Unsat) and self.report is not None


def _normalized(p) -> NormalizedProgram:
    if isinstance(p, NormalizedProgram):
        return p
    if isinstance(p, Program):
        return normalize_program(p)
    raise TypeError(p)


def modular_system(p, prime: str = "_p") -> HornSystem:
    return Encoding(_normalized(p), prime).system()


def extract_modular(p, cfg: SolverConfig | None = None, name: str = "program",
                    h: HornSystem | None = None) -> PipelineResult:
    cfg = cfg or SolverConfig()
    h = h or modular_system(p)
    v = solve(h, cfg, tag="modular")
    if not isinstance(v, Unsat):
        return PipelineResult(v, h)
    check = validate(v.model, h, cfg)
    report = ModularInvariantReport(
        name, DIRECT, _entries(v.model, h), check,
        main=v.model.get(h.roles["main"]), solver_seconds=v.seconds,
    )
    return PipelineResult(v, h, report)


def extract_monolithic(p, cfg: SolverConfig | None = None, name: str = "program",
                       h: HornSystem | None = None) -> PipelineResult:
    """Solve the inlined system; ``mono`` is the invariant found for Main."""
    cfg = cfg or SolverConfig()
    h = h or modular_system(p)
    m: MonolithicSystem = inline(h)
    hm = m.horn()
    v = solve(hm, cfg, tag="mono")
    if not isinstance(v, Unsat):
        return PipelineResult(v, hm)
    check = validate(v.model, hm, cfg)
    main = v.model[h.roles["main"]]
    report = ModularInvariantReport(name, DIRECT, _entries(v.model, hm), check, main=main,
                                    solver_seconds=v.seconds)
    return PipelineResult(v, hm, report, mono=Definition("Mono", main.params, main.body))


def reconstruct_modular(mono: Definition, h: HornSystem, cfg: SolverConfig | None = None,
                        name: str = "program", retry_with_property: bool = False) -> PipelineResult:
    """Node-level invariants from a monolithic one, via the mono-check rules.

    A Sat answer means ``mono`` is not inductive for the modular system; it
    is reported as such with the solver's trace and never weakened. With
    ``retry_with_property`` a second attempt conjoins the property to ``mono``.
    """
    cfg = cfg or SolverConfig()
    hc = emit_mono_check(mono, h)
    v = solve(hc, cfg, tag="monocheck")
    if isinstance(v, Sat) and retry_with_property:
        prop = inline(h).prop
        main = h.relation(h.roles["main"])
        renamed = t.substitute(prop, {p.name: q for p, q in zip(main.params, mono.params)})
        strengthened = Definition(mono.name, mono.params, t.and_(mono.body, renamed))
        hc2 = emit_mono_check(strengthened, h)
        v2 = solve(hc2, cfg, tag="monocheck-retry")
        if isinstance(v2, Unsat):
            hc, v, mono = hc2, v2, strengthened
    if not isinstance(v, Unsat):
        return PipelineResult(v, hc, mono=mono)
    check = validate(v.model, hc, cfg)
    report = ModularInvariantReport(
        name, RECONSTRUCTED, _entries(v.model, hc, ("trans", "init")), check,
        main=mono, solver_seconds=v.seconds,
    )
    return PipelineResult(v, hc, report, mono=mono)


def implies_property(inv: Definition, h: HornSystem, cfg: SolverConfig | None = None) -> bool | None:
    """Does a Main invariant entail the property? None when inconclusive."""
    m = inline(h)
    main = h.relation(h.roles["main"])
    prop = t.substitute(m.prop, {p.name: q for p, q in zip(main.params, inv.params)})
    res = check_validity_many([t.implies(inv.body, prop)], cfg, tag="entails")[0]
    if isinstance(res, Inconclusive):
        return None
    return not isinstance(res, Invalid)
