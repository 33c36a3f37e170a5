"""Resolution of callee relations into the top node, and the rules that check
a monolithic invariant against the modular encoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import (
    IN, OUT, STATE, HornSystem, Param, Relation, Rule,
)
from lustrehorn.horn.terms import App, Definition, Term, Var


class MonoSignatureError(ValueError):
    pass


def step_vars(main: Relation, prime: str) -> tuple[list[Var], list[Var], list[Var]]:
    """Main's variables, the primed inputs/outputs, and the primed state."""
    cur = [p.var for p in main.params]
    io_next = [Var(p.name + prime, p.sort) for p in main.params if p.role in (IN, OUT)]
    state_next = [Var(p.name + prime, p.sort) for p in main.params if p.role == STATE]
    return cur, io_next, state_next


@dataclass(frozen=True)
class MonolithicSystem:
    """Inlined initial and transition predicates of the top node."""

    init: Relation
    init_body: Term
    trans: Relation
    trans_body: Term
    main: Relation
    error: str
    prop: Term
    roles: dict

    @property
    def signature(self) -> tuple[Param, ...]:
        return self.main.params

    def horn(self, prop: Term | None = None) -> HornSystem:
        """Rules (i)-(v) over the inlined predicates only."""
        prop = self.prop if prop is None else prop
        cur, io_next, state_next = step_vars(self.main, self.roles["prime"])
        rules = (
            Rule(self.trans_body, self.trans.apply(), "(i) inlined"),
            Rule(self.init_body, self.init.apply(), "(ii) inlined"),
            Rule(self.init.apply(cur), self.main.apply(cur), "(iii) main init"),
            Rule(
                t.and_(self.trans.apply(io_next + cur[len(io_next):] + state_next), self.main.apply(cur)),
                self.main.apply(io_next + state_next),
                "(iv) main step",
            ),
            Rule(t.and_(self.main.apply(), t.not_(prop)), App(self.error, ()), "(v) property"),
        )
        rels = (self.trans, self.init, self.main, Relation(self.error, (), "error"))
        h = HornSystem(rels, rules, self.error, roles=dict(self.roles, inlined=True))
        h.check()
        return h


def _defining_rule(h: HornSystem, rel: str) -> Rule:
    rules = h.rules_for(rel)
    if len(rules) != 1:
        raise ValueError(f"expected exactly one rule defining {rel}, found {len(rules)}")
    return rules[0]


def resolve(body: Term, h: HornSystem, keep: set[str], counter=None) -> Term:
    """Replace applications of non-kept relations by their (renamed) definitions."""
    counter = counter or itertools.count(1)
    rels = h.relation_map

    def expand(a: App):
        if a.rel in keep or a.rel not in rels:
            return None
        rule = _defining_rule(h, a.rel)
        k = next(counter)
        params = [x.name for x in rule.head.args]
        mapping: dict[str, Term] = dict(zip(params, a.args))
        node = rels[a.rel].node or a.rel
        for name, sort in rule.variables.items():
            if name not in mapping:
                mapping[name] = Var(f"{node}{k}.{name}", sort)
        inner = t.substitute(rule.body, mapping)
        return resolve(inner, h, keep, counter)

    return t.expand_apps(body, expand)


def inline(h: HornSystem) -> MonolithicSystem:
    """Inline every callee relation into the top node's I and T predicates."""
    roles = h.roles
    top = roles["top"]
    trans_rel = h.relation(roles["trans"][top])
    init_rel = h.relation(roles["init"][top])
    main = h.relation(roles["main"])
    prop_rule = h.rules_for(h.query)[0]
    prop = _property_of(prop_rule, main)
    counter = itertools.count(1)
    trans_body = resolve(_defining_rule(h, trans_rel.name).body, h, set(), counter)
    init_body = resolve(_defining_rule(h, init_rel.name).body, h, set(), counter)
    return MonolithicSystem(init_rel, init_body, trans_rel, trans_body, main, h.query, prop, roles)


def _property_of(rule: Rule, main: Relation) -> Term:
    """Recover P from ``Main(...) and not P => Error``."""
    parts = t.conjuncts(rule.body)
    rest = [p for p in parts if not (isinstance(p, App) and p.rel == main.name)]
    neg = t.and_(*rest)
    return t.not_(neg)


def emit_mono_check(mono: Definition, h: HornSystem, name: str | None = None) -> HornSystem:
    """Node rules of ``h`` plus the two rules checking ``mono`` against them.

    ``mono`` is rendered as a macro, so the initial-state rule is stated as
    ``I(x) and not Mono(x) => Error``, equivalent to ``I(x) => Mono(x)``.
    """
    roles = h.roles
    top = roles["top"]
    main = h.relation(roles["main"])
    trans_rel = h.relation(roles["trans"][top])
    init_rel = h.relation(roles["init"][top])
    want = tuple(p.sort for p in main.params)
    if mono.sorts != want:
        raise MonoSignatureError(
            f"monolithic invariant has signature ({' '.join(mono.sorts)}); "
            f"expected ({' '.join(want)}) over inputs, outputs and state of {top!r}"
        )
    taken = {r.name for r in h.relations}
    mname = name or mono.name
    while mname in taken:
        mname += "_"
    mono = Definition(mname, mono.params, mono.body)
    cur, io_next, state_next = step_vars(main, roles["prime"])
    mono_app = lambda args: App(mname, tuple(args))
    node_rules = tuple(r for r in h.rules if h.relation(r.head.rel).kind in ("trans", "init"))
    r6 = Rule(t.and_(init_rel.apply(cur), t.not_(mono_app(cur))), App(h.query, ()), "(vi) mono init")
    r7 = Rule(
        t.and_(
            trans_rel.apply(io_next + cur[len(io_next):] + state_next),
            mono_app(cur),
            t.not_(mono_app(io_next + state_next)),
        ),
        App(h.query, ()),
        "(vii) mono step",
    )
    rels = tuple(r for r in h.relations if r.kind in ("trans", "init")) + (h.relation(h.query),)
    out = HornSystem(rels, node_rules + (r6, r7), h.query, (mono,), roles=dict(roles, mono=mname))
    out.check()
    return out
