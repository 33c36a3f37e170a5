"""Modular Horn encoding of a normalized program.

Per node ``N`` two relations are declared: the transition relation ``N`` over
``(inputs, outputs, State, State')`` and the initial relation ``N_Init`` over
``(inputs, outputs, State')``. The top node adds ``Main`` and the nullary
``Error`` relation with a single query.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from lustrehorn.frontend.ast import (
    BOOL as L_BOOL, INT as L_INT, BinOp, BoolLit, Expr, IntLit, Ite, UnOp, VarRef, vars_read,
)
from lustrehorn.horn import terms as t
from lustrehorn.horn.terms import App, Definition, Term, Var
from lustrehorn.normalize import CallDef, MemDef, NormalizedNode, NormalizedProgram, SimpleDef
from lustrehorn.state import InstanceMem, StateAnalysis, StateSignature

SORT = {L_BOOL: t.BOOL, L_INT: t.INT}

IN, OUT, STATE, STATE_P = "in", "out", "state", "state_p"


@dataclass(frozen=True)
class Param:
    name: str
    sort: str
    role: str
    base: str | None = None  # flattened state variable for state/state_p params

    @property
    def var(self) -> Var:
        return Var(self.name, self.sort)


@dataclass(frozen=True)
class Relation:
    name: str
    params: tuple[Param, ...]
    kind: str  # trans | init | main | error
    node: str | None = None

    @property
    def sorts(self) -> tuple[str, ...]:
        return tuple(p.sort for p in self.params)

    @property
    def arity(self) -> int:
        return len(self.params)

    def apply(self, args: Iterable[Term] | None = None) -> App:
        if args is None:
            return App(self.name, tuple(p.var for p in self.params))
        args = tuple(args)
        if len(args) != self.arity:
            raise ValueError(f"{self.name} expects {self.arity} arguments, got {len(args)}")
        return App(self.name, args)


@dataclass(frozen=True)
class Rule:
    body: Term
    head: App
    label: str = ""

    @property
    def variables(self) -> dict[str, str]:
        return t.free_vars(self.body, self.head)


@dataclass(frozen=True)
class HornSystem:
    relations: tuple[Relation, ...]
    rules: tuple[Rule, ...]
    query: str = "Error"
    definitions: tuple[Definition, ...] = ()
    roles: dict = field(default_factory=dict, compare=False)

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def relation_map(self) -> dict[str, Relation]:
        return {r.name: r for r in self.relations}

    def rules_for(self, name: str) -> list[Rule]:
        return [r for r in self.rules if r.head.rel == name]

    def check(self) -> None:
        """Every application refers to a declared relation with the right arity."""
        rels = self.relation_map
        defs = {d.name: d for d in self.definitions}
        for rule in self.rules:
            for a in list(t.apps(rule.body)) + [rule.head]:
                if a.rel in rels:
                    want = rels[a.rel].sorts
                elif a.rel in defs:
                    want = defs[a.rel].sorts
                else:
                    raise ValueError(f"rule {rule.label}: undeclared relation {a.rel!r}")
                if tuple(t.sort_of(x) for x in a.args) != want:
                    raise ValueError(f"rule {rule.label}: {a.rel} applied with wrong arity or sorts")


class EncodingError(ValueError):
    pass


def _translate(e: Expr, env: dict[str, Term]) -> Term:
    """Stateless Lustre expression to a term; variables are looked up in ``env``."""
    if isinstance(e, BoolLit):
        return t.bool_const(e.value)
    if isinstance(e, IntLit):
        return t.int_const(e.value)
    if isinstance(e, VarRef):
        return env[e.name]
    if isinstance(e, UnOp):
        a = _translate(e.arg, env)
        if e.op == "not":
            return t.not_(a)
        if isinstance(a, t.Const):
            return t.int_const(-a.value)
        return t.Op("-", (a,))
    if isinstance(e, BinOp):
        a, b = _translate(e.left, env), _translate(e.right, env)
        if e.op == "<>":
            return t.Op("distinct", (a, b))
        return t.op(e.op, a, b)
    if isinstance(e, Ite):
        return t.ite(_translate(e.cond, env), _translate(e.then, env), _translate(e.else_, env))
    raise EncodingError(f"expression is not stateless: {e!r}")


def _unique(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    k = 1
    while f"{name}{k}" in taken:
        k += 1
    return f"{name}{k}"


class Encoding:
    """Relation naming, state signatures and rule construction for one program."""

    def __init__(self, p: NormalizedProgram, prime: str = "_p"):
        self.program = p
        self.nodes = p.node_map
        self.states = StateAnalysis(p)
        self.sigs: dict[str, StateSignature] = self.states.all()
        self.prime = self._choose_prime(prime)
        taken: set[str] = set()
        self.trans_name: dict[str, str] = {}
        self.init_name: dict[str, str] = {}
        for n in p.nodes:
            self.trans_name[n.name] = _unique(n.name, taken)
            taken.add(self.trans_name[n.name])
        for n in p.nodes:
            self.init_name[n.name] = _unique(f"{n.name}_Init", taken)
            taken.add(self.init_name[n.name])
        self.main_name = _unique("Main", taken)
        taken.add(self.main_name)
        self.error_name = _unique("Error", taken)
        self.relations: dict[str, Relation] = {}
        for n in p.nodes:
            self.relations[self.trans_name[n.name]] = self._node_relation(n, "trans")
            self.relations[self.init_name[n.name]] = self._node_relation(n, "init")
        top = self.nodes[p.main]
        self.relations[self.main_name] = Relation(
            self.main_name,
            self._io_params(top) + tuple(Param(s, SORT[ty], STATE, s) for s, ty in self._state(top)),
            "main", top.name,
        )
        self.relations[self.error_name] = Relation(self.error_name, (), "error")

    # -- naming -----------------------------------------------------------

    def _all_names(self) -> set[str]:
        names = set()
        for n in self.program.nodes:
            names.update(n.var_types)
            names.update(self.sigs[n.name].names)
        return names

    def _choose_prime(self, prime: str) -> str:
        names = self._all_names()
        cand, k = prime, 1
        while any(v + cand in names for v in names):
            k += 1
            cand = f"{prime}{k}"
        return cand

    def primed(self, name: str) -> str:
        return name + self.prime

    def _state(self, n: NormalizedNode) -> list[tuple[str, str]]:
        sig = self.sigs[n.name]
        return [(e.flat, e.ty) for e in sig.entries]

    def _io_params(self, n: NormalizedNode) -> tuple[Param, ...]:
        return tuple(Param(d.name, SORT[d.ty], IN) for d in n.inputs) + tuple(
            Param(d.name, SORT[d.ty], OUT) for d in n.outputs
        )

    def _node_relation(self, n: NormalizedNode, kind: str) -> Relation:
        state = self._state(n)
        cur = tuple(Param(s, SORT[ty], STATE, s) for s, ty in state)
        nxt = tuple(Param(self.primed(s), SORT[ty], STATE_P, s) for s, ty in state)
        if kind == "trans":
            return Relation(self.trans_name[n.name], self._io_params(n) + cur + nxt, kind, n.name)
        return Relation(self.init_name[n.name], self._io_params(n) + nxt, kind, n.name)

    def trans_rel(self, node: str) -> Relation:
        return self.relations[self.trans_name[node]]

    def init_rel(self, node: str) -> Relation:
        return self.relations[self.init_name[node]]

    @property
    def main_rel(self) -> Relation:
        return self.relations[self.main_name]

    # -- phi ----------------------------------------------------------------

    def phi(self, n: NormalizedNode, eqs, initial: bool) -> Term:
        """Conjunction encoding ``eqs`` of node ``n``.

        Memory variables are read through the unprimed state and written
        through the primed one. Node calls apply the callee's transition
        relation, or its initial relation when ``initial`` is set.
        """
        types = n.var_types
        env: dict[str, Term] = {v: Var(v, SORT[ty]) for v, ty in types.items()}
        parts: list[Term] = []
        for eq in eqs:
            if isinstance(eq, SimpleDef):
                parts.append(t.eq(env[eq.var], _translate(eq.expr, env)))
            elif isinstance(eq, MemDef):
                nxt = Var(self.primed(eq.var), SORT[types[eq.var]])
                parts.append(t.eq(nxt, _translate(eq.expr, env)))
            elif isinstance(eq, CallDef):
                if eq.callee not in self.nodes:
                    raise EncodingError(f"unknown callee relation for {eq.callee!r}")
                args = [_translate(a, env) for a in eq.args] + [env[v] for v in eq.vars]
                prefix = f"u{eq.uid}_{eq.callee}_"
                inner = self._state(self.nodes[eq.callee])
                cur = [Var(prefix + s, SORT[ty]) for s, ty in inner]
                nxt = [Var(self.primed(prefix + s), SORT[ty]) for s, ty in inner]
                if initial:
                    parts.append(self.init_rel(eq.callee).apply(args + nxt))
                else:
                    parts.append(self.trans_rel(eq.callee).apply(args + cur + nxt))
            else:
                raise TypeError(eq)
        return t.and_(*parts)

    # -- rules ------------------------------------------------------------

    def node_rules(self, n: NormalizedNode) -> tuple[Rule, Rule]:
        trans = Rule(self.phi(n, n.trans_eqs, False), self.trans_rel(n.name).apply(), f"(i) {n.name}")
        init = Rule(self.phi(n, n.init_eqs, True), self.init_rel(n.name).apply(), f"(ii) {n.name}")
        return trans, init

    def main_rules(self) -> tuple[Rule, Rule]:
        top = self.program.top
        io = self._io_params(top)
        state = self._state(top)
        cur = [Var(s, SORT[ty]) for s, ty in state]
        nxt = [Var(self.primed(s), SORT[ty]) for s, ty in state]
        io_now = [p.var for p in io]
        io_next = [Var(self.primed(p.name), p.sort) for p in io]
        r3 = Rule(
            self.init_rel(top.name).apply(io_now + cur),
            self.main_rel.apply(io_now + cur),
            "(iii) main init",
        )
        r4 = Rule(
            t.and_(
                self.trans_rel(top.name).apply(io_next + cur + nxt),
                self.main_rel.apply(io_now + cur),
            ),
            self.main_rel.apply(io_next + nxt),
            "(iv) main step",
        )
        return r3, r4

    def property_term(self, props: Iterable[Expr] | None = None) -> Term:
        """Conjunction of the top node's observer properties over Main's signature."""
        top = self.program.top
        props = list(top.properties if props is None else props)
        allowed = {p.name: p.var for p in self.main_rel.params}
        for e in props:
            bad = [v for v in vars_read(e) if v not in allowed]
            if bad:
                raise EncodingError(
                    f"property mentions {', '.join(bad)}, which are not inputs, outputs or state of {top.name!r}"
                )
        return t.and_(*(_translate(e, allowed) for e in props))

    def property_rule(self, prop: Term) -> Rule:
        return Rule(
            t.and_(self.main_rel.apply(), t.not_(prop)),
            App(self.error_name, ()),
            "(v) property",
        )

    def system(self, prop: Term | None = None) -> HornSystem:
        rules: list[Rule] = []
        for name in self.declaration_order():
            rules.extend(self.node_rules(self.nodes[name]))
        rules.extend(self.main_rules())
        rules.append(self.property_rule(self.property_term() if prop is None else prop))
        rels = []
        for name in self.declaration_order():
            rels += [self.trans_rel(name), self.init_rel(name)]
        rels += [self.main_rel, self.relations[self.error_name]]
        h = HornSystem(tuple(rels), tuple(rules), self.error_name, roles=self.roles())
        h.check()
        return h

    def declaration_order(self) -> list[str]:
        """Callees before callers; ties broken by program order."""
        done: list[str] = []

        def visit(name):
            if name in done:
                return
            for eq in self.nodes[name].trans_eqs:
                if isinstance(eq, CallDef):
                    visit(eq.callee)
            done.append(name)

        for n in self.program.nodes:
            visit(n.name)
        return done

    def roles(self) -> dict:
        """Metadata used by inlining, unrolling and abstraction.

        ``groups`` lists abstraction groups (nodes callees-first, then Main)
        with their state variables and Lustre types; ``origin`` maps a
        flattened instance variable to the callee group and its name there.
        """
        groups: dict[str, list[tuple[str, str]]] = {}
        origin: dict[str, dict[str, tuple[str, str]]] = {}
        for name in self.declaration_order():
            sig = self.sigs[name]
            groups[name] = [(e.flat, e.ty) for e in sig.entries]
            origin[name] = {
                e.flat: (e.callee, e.inner.flat) for e in sig.entries if isinstance(e, InstanceMem)
            }
        top = self.program.main
        groups[self.main_name] = list(groups[top])
        origin[self.main_name] = {v: (top, v) for v, _ in groups[top]}
        return {
            "top": top,
            "main": self.main_name,
            "error": self.error_name,
            "trans": dict(self.trans_name),
            "init": dict(self.init_name),
            "prime": self.prime,
            "groups": groups,
            "origin": origin,
        }


def phi(n: NormalizedNode, eqs, enc: Encoding, initial: bool = False) -> Term:
    return enc.phi(n, eqs, initial)


def emit_node_rules(n: NormalizedNode, enc: Encoding) -> tuple[Rule, Rule]:
    return enc.node_rules(n)


def emit_main_rules(enc: Encoding) -> tuple[Rule, Rule]:
    return enc.main_rules()


def emit_property_rule(enc: Encoding, prop: Term | None = None) -> Rule:
    return enc.property_rule(enc.property_term() if prop is None else prop)


def encode(p: NormalizedProgram, prime: str = "_p") -> HornSystem:
    return Encoding(p, prime).system()


def with_property(h: HornSystem, prop_rule: Rule) -> HornSystem:
    """Replace the property rule of ``h``."""
    rules = tuple(r for r in h.rules if r.head.rel != h.query) + (prop_rule,)
    return replace(h, rules=rules)
