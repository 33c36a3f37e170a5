"""Bounded unrolling of a Horn system along its Main chain.

Every relation application is resolved by its (unique, non-recursive)
defining rule. State arguments are not substituted directly: each one is
bound through an equality tagged with a *link label* ``(group, var)``, where
the group is the node owning the relation (or the Main relation). Leaving a
label's equalities out yields exactly the unrolling of the system in which
that state parameter has been dropped, which is what the minimizer needs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from lustrehorn.horn import terms as t
from lustrehorn.horn.encoder import IN, OUT, STATE, STATE_P, HornSystem, Relation
from lustrehorn.horn.terms import App, Term, Var

Label = tuple[str, str]


def group_of(rel: Relation) -> str:
    return rel.node if rel.kind in ("trans", "init") else rel.name


@dataclass
class Unrolling:
    base: list[Term] = field(default_factory=list)
    links: list[tuple[Label, Term]] = field(default_factory=list)
    steps: list[dict[str, Var]] = field(default_factory=list)
    bad: Term = t.FALSE

    def formula(self, keep=None) -> Term:
        """Base constraints plus the links whose label is kept (all by default)."""
        ls = [f for lab, f in self.links if keep is None or lab in keep]
        return t.and_(*self.base, *ls)

    @property
    def labels(self) -> list[Label]:
        seen: dict[Label, None] = {}
        for lab, _ in self.links:
            seen.setdefault(lab, None)
        return list(seen)

    def io(self, i: int, role: str) -> dict[str, Var]:
        return {n: v for n, v in self.steps[i].items() if self._roles[n] == role}

    _roles: dict = field(default_factory=dict)


class Unroller:
    def __init__(self, h: HornSystem, prefix: str = ""):
        self.h = h
        self.rels = h.relation_map
        roles = h.roles
        self.main = self.rels[roles["main"]]
        self.top_trans = self.rels[roles["trans"][roles["top"]]]
        self.top_init = self.rels[roles["init"][roles["top"]]]
        self.prefix = prefix
        self.counter = itertools.count(1)

    def _rule(self, rel: str):
        rules = self.h.rules_for(rel)
        if len(rules) != 1:
            raise ValueError(f"expected one rule for {rel}, found {len(rules)}")
        return rules[0]

    def _resolve(self, a: App, out: Unrolling) -> Term:
        rel = self.rels[a.rel]
        rule = self._rule(a.rel)
        k = next(self.counter)
        group = group_of(rel)
        tag = f"{self.prefix}{rel.node or rel.name}{k}."
        # bind the rule head's arguments position by position; a head argument
        # that is not a fresh variable becomes an equality
        mapping: dict[str, Term] = {}
        extra: list[Term] = []
        bound: list[tuple[Term, Term]] = []
        for p, head_arg, arg in zip(rel.params, rule.head.args, a.args):
            if p.role in (STATE, STATE_P):
                fresh = Var(tag + p.name, p.sort)
                out.links.append(((group, p.base), t.eq(fresh, arg)))
                arg = fresh
            if isinstance(head_arg, Var) and head_arg.name not in mapping:
                mapping[head_arg.name] = arg
            else:
                bound.append((head_arg, arg))
        for name, sort in rule.variables.items():
            if name not in mapping:
                mapping[name] = Var(tag + name, sort)
        for head_arg, arg in bound:
            extra.append(t.eq(t.substitute(head_arg, mapping), arg))
        body = t.and_(t.substitute(rule.body, mapping), *extra)
        return t.expand_apps(body, lambda b: self._resolve(b, out) if b.rel in self.rels else None)

    def _main_vars(self, i: int) -> dict[str, Var]:
        return {p.name: Var(f"{self.prefix}{p.name}@{i}", p.sort) for p in self.main.params}

    def _args(self, rel: Relation, io: dict[str, Var], cur, nxt, out: Unrolling) -> list[Term]:
        """Arguments for the top relation; state arguments link to Main's copies."""
        args: list[Term] = []
        for p in rel.params:
            if p.role in (IN, OUT):
                args.append(io[p.name])
            else:
                src = cur if p.role == STATE else nxt
                fresh = Var(f"{self.prefix}{self.main.name}{next(self.counter)}.{p.base}", p.sort)
                out.links.append(((self.main.name, p.base), t.eq(fresh, src[p.base])))
                args.append(fresh)
        return args

    def unroll(self, k: int, prop: Term | None = None) -> Unrolling:
        """``k`` Main steps (k >= 1); ``bad`` is the negated property at step k-1."""
        out = Unrolling()
        out._roles = {p.name: p.role for p in self.main.params}
        for i in range(k):
            mv = self._main_vars(i)
            out.steps.append(mv)
            state_now = {p.base: mv[p.name] for p in self.main.params if p.role == STATE}
            if i == 0:
                args = self._args(self.top_init, mv, None, state_now, out)
                out.base.append(self._resolve(App(self.top_init.name, tuple(args)), out))
            else:
                prev = out.steps[i - 1]
                state_prev = {p.base: prev[p.name] for p in self.main.params if p.role == STATE}
                args = self._args(self.top_trans, mv, state_prev, state_now, out)
                out.base.append(self._resolve(App(self.top_trans.name, tuple(args)), out))
        if k > 0:
            out.bad = self._bad(out.steps[-1], out, prop)
        return out

    def _bad(self, mv: dict[str, Var], out: Unrolling, prop: Term | None) -> Term:
        """The property rule's body (minus Main) at the given step."""
        rule = self.h.rules_for(self.h.query)[0]
        mapping: dict[str, Term] = {}
        main_app = next(a for a in t.apps(rule.body) if a.rel == self.main.name)
        rest = t.and_(*(c for c in t.conjuncts(rule.body) if c != main_app))
        if prop is not None:
            rest = t.not_(prop)
        for p, arg in zip(self.main.params, main_app.args):
            if p.role == STATE:
                fresh = Var(f"{self.prefix}{self.main.name}{next(self.counter)}.{p.base}", p.sort)
                out.links.append(((self.main.name, p.base), t.eq(fresh, mv[p.name])))
                mapping[arg.name] = fresh
            else:
                mapping[arg.name] = mv[p.name]
        return t.substitute(rest, mapping)


def unroll(h: HornSystem, k: int, prefix: str = "", prop: Term | None = None) -> Unrolling:
    return Unroller(h, prefix).unroll(k, prop)
