"""State-signature ranking and counterexample-guided signature minimization.

An abstraction keeps, per group (a node's T/I relations, or Main), a subset of
the state parameters. Dropped parameters disappear from the relation
signatures; in rule bodies they become free, i.e. arbitrary. Spurious
counterexamples of the abstraction are replayed on the concrete unrolling,
and the dropped links responsible for their infeasibility are reinstated.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import IN, STATE, STATE_P, HornSystem, Relation, Rule
from lustrehorn.horn.terms import App
from lustrehorn.invariants import ModularInvariantReport, _entries, validate, DIRECT
from lustrehorn.solver import Invalid, Sat, Session, SolverConfig, Unsat, check_validity, solve
from lustrehorn.unroll import Label, Unrolling, group_of, unroll


# ---------------------------------------------------------------------------
# rank


class UnrankedType(ValueError):
    pass


@dataclass(frozen=True)
class Rank:
    ints: int = 0
    bits: int = 0

    def __post_init__(self):
        if self.ints < 0 or self.bits < 0:
            raise ValueError("rank components are nonnegative")

    def __add__(self, other: "Rank") -> "Rank":
        return Rank(self.ints + other.ints, self.bits + other.bits)

    def __str__(self):
        return f"({self.ints},{self.bits})"


_BV = re.compile(r"^(?:bitvector|bv)\s*\(\s*(\d+)\s*\)$|^\(_\s+BitVec\s+(\d+)\)$", re.IGNORECASE)


def type_rank(ty) -> Rank:
    """bool -> (0,1), int -> (1,0), bitvector(n) -> (0,n)."""
    if isinstance(ty, tuple) and len(ty) == 2 and ty[0] in ("bv", "bitvector"):
        return Rank(0, int(ty[1]))
    text = str(ty).strip()
    if text.lower() == "bool":
        return Rank(0, 1)
    if text.lower() == "int":
        return Rank(1, 0)
    m = _BV.match(text)
    if m:
        return Rank(0, int(m.group(1) or m.group(2)))
    raise UnrankedType(f"cannot rank type {ty!r}")


def rank(vars: Mapping[str, object] | Iterable[tuple[str, object]]) -> Rank:
    items = vars.items() if isinstance(vars, Mapping) else vars
    total = Rank()
    for _, ty in items:
        total = total + type_rank(ty)
    return total


def lex_less(a: Rank, b: Rank) -> bool:
    return a.ints < b.ints or (a.ints == b.ints and a.bits < b.bits)


# ---------------------------------------------------------------------------
# abstraction maps


@dataclass(frozen=True)
class AbstractionMap:
    """Retained state variables per group; anything not listed is dropped."""

    retained: Mapping[str, frozenset[str]]

    @classmethod
    def empty(cls, h: HornSystem) -> "AbstractionMap":
        return cls({g: frozenset() for g in h.roles["groups"]})

    @classmethod
    def full(cls, h: HornSystem) -> "AbstractionMap":
        return cls({g: frozenset(v for v, _ in vs) for g, vs in h.roles["groups"].items()})

    def keeps(self, group: str, var: str) -> bool:
        return var in self.retained.get(group, frozenset())

    def labels(self) -> set[Label]:
        return {(g, v) for g, vs in self.retained.items() for v in vs}

    def add(self, labels: Iterable[Label], h: HornSystem) -> "AbstractionMap":
        new = {g: set(vs) for g, vs in self.retained.items()}
        for g, v in labels:
            new.setdefault(g, set()).add(v)
        return AbstractionMap(_closure(new, h))

    def size(self) -> int:
        return sum(len(v) for v in self.retained.values())

    def to_dict(self, h: HornSystem) -> dict:
        order = h.roles["groups"]
        return {g: [v for v, _ in order[g] if v in self.retained.get(g, ())] for g in order}


def _closure(retained: dict[str, set[str]], h: HornSystem) -> dict[str, frozenset[str]]:
    """A caller keeping an instance variable forces the callee to keep it too."""
    origin = h.roles["origin"]
    changed = True
    while changed:
        changed = False
        for g, vs in list(retained.items()):
            for v in list(vs):
                src = origin.get(g, {}).get(v)
                if src is not None and src[1] not in retained.setdefault(src[0], set()):
                    retained[src[0]].add(src[1])
                    changed = True
    return {g: frozenset(vs) for g, vs in retained.items()}


def label_order(h: HornSystem) -> list[Label]:
    """Groups in declaration order, variables in signature order."""
    return [(g, v) for g, vs in h.roles["groups"].items() for v, _ in vs]


def abstract(h: HornSystem, m: AbstractionMap) -> HornSystem:
    """Drop unretained state parameters from every relation and application."""
    keep_pos: dict[str, list[int]] = {}
    rels = []
    for r in h.relations:
        g = group_of(r)
        if r.kind not in ("trans", "init", "main"):
            rels.append(r)
            continue
        pos = [i for i, p in enumerate(r.params) if p.role not in (STATE, STATE_P) or m.keeps(g, p.base)]
        keep_pos[r.name] = pos
        rels.append(replace(r, params=tuple(r.params[i] for i in pos)))

    def cut(a: App):
        if a.rel not in keep_pos:
            return None
        return App(a.rel, tuple(a.args[i] for i in keep_pos[a.rel]))

    rules = []
    for rule in h.rules:
        body = t.expand_apps(rule.body, cut)
        head = cut(rule.head) or rule.head
        rules.append(Rule(body, head, rule.label))
    out = HornSystem(tuple(rels), tuple(rules), h.query, h.definitions, roles=h.roles)
    out.check()
    return out


# ---------------------------------------------------------------------------
# refinement


class CexNotSpurious(Exception):
    """The abstract counterexample is feasible in the concrete system."""

    def __init__(self, depth: int, inputs: list[dict]):
        super().__init__(f"counterexample of depth {depth} is feasible on the concrete system")
        self.depth = depth
        self.inputs = inputs


@dataclass
class RefineStats:
    checks: int = 0
    seconds: list[float] = field(default_factory=list)
    core: list[Label] = field(default_factory=list)
    pins_used: bool = True
    fallback: str = ""


def _main_inputs(h: HornSystem, cex, abstract_main: Relation) -> list[dict]:
    """Input valuation per step from the Main facts of an abstract trace."""
    if cex is None:
        return []
    steps = []
    for f in cex.of(abstract_main.name):
        steps.append({p.name: v for p, v in zip(abstract_main.params, f.values) if p.role == IN})
    return steps


def _smt_val(v) -> str:
    return t.to_smt(t.bool_const(v) if isinstance(v, bool) else t.int_const(v))


class _Replay:
    """Solver session holding one unrolling with selector-guarded links."""

    def __init__(self, u: Unrolling, retained: set[Label], pins: list[dict], cfg: SolverConfig,
                 stats: RefineStats):
        self.stats = stats
        self.u = u
        self.dropped = [lab for lab in u.labels if lab not in retained]
        self.selector = {lab: f"sel!{k}" for k, lab in enumerate(self.dropped)}
        self.by_selector = {s: lab for lab, s in self.selector.items()}
        core = t.and_(*u.base, u.bad, *(f for lab, f in u.links if lab in retained))
        fs = [core] + [f for _, f in u.links]
        decls = {}
        for f in fs:
            decls.update(t.free_vars(f))
        for mv in u.steps:
            for v in mv.values():
                decls.setdefault(v.name, v.sort)
        self.session = Session(cfg)
        s = self.session
        s.send("(set-option :produce-unsat-cores true)")
        for name, sort in decls.items():
            s.send(f"(declare-fun {t.symbol(name)} () {sort})")
        for sel in self.selector.values():
            s.send(f"(declare-fun {sel} () Bool)")
        s.send(f"(assert {t.to_smt(core)})")
        for lab, f in u.links:
            if lab in self.selector:
                s.send(f"(assert (=> {self.selector[lab]} {t.to_smt(f)}))")
        for i, vals in enumerate(pins):
            for name, v in vals.items():
                s.send(f"(assert (= {t.to_smt(u.steps[i][name])} {_smt_val(v)}))")

    def unsat_with(self, labels: Iterable[Label]) -> tuple[bool, list[Label]]:
        start = time.monotonic()
        ans = self.session.check(self.selector[lab] for lab in labels)
        self.stats.checks += 1
        self.stats.seconds.append(time.monotonic() - start)
        if ans == "unsat":
            return True, [self.by_selector[s] for s in self.session.unsat_core() if s in self.by_selector]
        if ans == "sat":
            return False, []
        raise RuntimeError(f"solver answered {ans} during refinement")

    def close(self):
        self.session.close()


def refine(h: HornSystem, m: AbstractionMap, cex, cfg: SolverConfig | None = None,
           depth: int | None = None, stats: RefineStats | None = None) -> AbstractionMap:
    """Reinstate a deletion-minimal set of dropped links that refutes ``cex``.

    The core of the full replay seeds the search; every dropped label up to
    the last core label (in signature order) is a candidate, and candidates
    are deleted greedily from the end, so earlier variables win ties.
    """
    cfg = cfg or SolverConfig()
    stats = stats if stats is not None else RefineStats()
    abs_main = abstract(h, m).relation(h.roles["main"])
    pins = _main_inputs(h, cex, abs_main)
    k = depth or len(pins)
    if k <= 0:
        raise ValueError("refinement needs the depth of the counterexample")
    u = unroll(h, k)
    retained = m.labels()
    order = {lab: i for i, lab in enumerate(label_order(h))}

    for use_pins in (True, False) if pins else (False,):
        replay = _Replay(u, retained, pins if use_pins else [], cfg, stats)
        try:
            dropped = replay.dropped
            unsat, core = replay.unsat_with(dropped)
            if not unsat:
                if use_pins:
                    raise CexNotSpurious(k, pins)
                raise CexNotSpurious(k, [])
            if not core:
                continue
            stats.pins_used = use_pins
            last = max(order[lab] for lab in core)
            cand = sorted((lab for lab in dropped if order[lab] <= last), key=order.get)
            current = list(cand)
            for lab in reversed(cand):
                trial = [x for x in current if x != lab]
                ok, _ = replay.unsat_with(trial)
                if ok:
                    current = trial
            stats.core = current
            return m.add(current, h)
        finally:
            replay.close()
    stats.fallback = "reinstated every dropped variable"
    return m.add(u.labels, h)


# ---------------------------------------------------------------------------
# the loop


@dataclass
class RelationRow:
    relation: str
    group: str
    original: list[str]
    original_rank: Rank
    final: list[str]
    final_rank: Rank

    def to_dict(self):
        return {
            "relation": self.relation, "group": self.group,
            "original_signature": self.original, "original_rank": [self.original_rank.ints, self.original_rank.bits],
            "final_signature": self.final, "final_rank": [self.final_rank.ints, self.final_rank.bits],
            "reduced": lex_less(self.final_rank, self.original_rank),
        }


@dataclass
class MinimizationResult:
    system: HornSystem
    abstraction: AbstractionMap
    report: ModularInvariantReport | None
    rows: list[RelationRow]
    iterations: int
    solver_seconds: list[float]
    status: str  # minimized | no-reduction | iteration-cap | fallback
    original_rank: Rank
    final_rank: Rank
    warnings: list[str] = field(default_factory=list)

    @property
    def reduced(self) -> bool:
        return lex_less(self.final_rank, self.original_rank)

    def to_dict(self, h: HornSystem) -> dict:
        return {
            "status": self.status,
            "reduced": self.reduced,
            "marker": None if self.reduced else "no reduction",
            "iterations": self.iterations,
            "original_rank": [self.original_rank.ints, self.original_rank.bits],
            "final_rank": [self.final_rank.ints, self.final_rank.bits],
            "abstraction": self.abstraction.to_dict(h),
            "relations": [r.to_dict() for r in self.rows],
            "solver_seconds": [round(s, 4) for s in self.solver_seconds],
            "invariants_status": None if self.report is None else self.report.status,
            "warnings": self.warnings,
        }


class PropertyViolated(Exception):
    def __init__(self, verdict):
        super().__init__("the property does not hold on the concrete system")
        self.verdict = verdict


def _group_rank(h: HornSystem, group: str, keep=None) -> tuple[list[str], Rank]:
    vs = [(v, ty) for v, ty in h.roles["groups"][group] if keep is None or v in keep]
    return [v for v, _ in vs], rank(vs)


def _rows(h: HornSystem, m: AbstractionMap) -> list[RelationRow]:
    rows = []
    for r in h.relations:
        if r.kind not in ("trans", "init", "main"):
            continue
        g = group_of(r)
        orig, orank = _group_rank(h, g)
        fin, frank = _group_rank(h, g, m.retained.get(g, frozenset()))
        rows.append(RelationRow(r.name, g, orig, orank, fin, frank))
    return rows


def _headline(h: HornSystem, rows: list[RelationRow], attr: str) -> Rank:
    """Rank of the top node's signature, which Main shares."""
    top = h.roles["trans"][h.roles["top"]]
    return next(getattr(r, attr) for r in rows if r.relation == top)


def minimize(h: HornSystem, cfg: SolverConfig | None = None, max_iter: int | None = None,
             check_concrete: bool = True, name: str = "program") -> MinimizationResult:
    """CEGAR loop from the empty abstraction up to a safe one."""
    cfg = cfg or SolverConfig()
    seconds: list[float] = []
    if check_concrete:
        v0 = solve(h, cfg, tag="concrete")
        seconds.append(getattr(v0, "seconds", 0.0))
        if isinstance(v0, Sat):
            raise PropertyViolated(v0)
        if not isinstance(v0, Unsat):
            raise RuntimeError(f"concrete system could not be decided: {v0.name}")
    cap = max_iter if max_iter is not None else len(label_order(h)) + 1
    m = AbstractionMap.empty(h)
    m = AbstractionMap(_closure({g: set(v) for g, v in m.retained.items()}, h))
    warnings: list[str] = []
    status = "iteration-cap"
    it = 0
    final_sys, final_verdict = None, None
    while it < cap:
        it += 1
        ha = abstract(h, m)
        v = solve(ha, cfg, tag=f"abstract{it}")
        seconds.append(getattr(v, "seconds", 0.0))
        if isinstance(v, Unsat):
            final_sys, final_verdict = ha, v
            status = "minimized"
            break
        if not isinstance(v, Sat):
            warnings.append(f"abstraction {it}: solver answered {v.name}; stopping")
            break
        stats = RefineStats()
        depth = None
        if v.trace is None or not v.trace.of(h.roles["main"]):
            depth = _bmc_depth(h, m, cfg)
        new = refine(h, m, v.trace, cfg, depth=depth, stats=stats)
        seconds.extend(stats.seconds)
        if stats.fallback:
            warnings.append(f"iteration {it}: {stats.fallback}")
        if new.size() <= m.size():
            warnings.append(f"iteration {it}: refinement made no progress; using the concrete system")
            m = AbstractionMap.full(h)
        else:
            m = new
    if final_sys is None:
        if status == "iteration-cap":
            warnings.append(f"iteration cap {cap} reached; returning the concrete system")
        m = AbstractionMap.full(h)
        final_sys = h
        v = solve(h, cfg, tag="concrete-final")
        final_verdict = v if isinstance(v, Unsat) else None
        status = "iteration-cap" if status == "iteration-cap" else "fallback"
    report = None
    if final_verdict is not None:
        check = validate(final_verdict.model, final_sys, cfg)
        report = ModularInvariantReport(name, DIRECT, _entries(final_verdict.model, final_sys), check,
                                        main=final_verdict.model.get(h.roles["main"]))
    rows = _rows(h, m)
    orig, fin = _headline(h, rows, "original_rank"), _headline(h, rows, "final_rank")
    if status == "minimized" and not lex_less(fin, orig):
        status = "no-reduction"
    return MinimizationResult(final_sys, m, report, rows, it, seconds, status, orig, fin, warnings)


def _bmc_depth(h: HornSystem, m: AbstractionMap, cfg: SolverConfig, limit: int = 30) -> int:
    """Shallowest depth at which the abstraction reaches the error."""
    keep = m.labels()
    for k in range(1, limit + 1):
        u = unroll(h, k)
        f = t.and_(u.formula(keep), u.bad)
        if isinstance(check_validity(t.not_(f), cfg), Invalid):
            return k
    return limit
