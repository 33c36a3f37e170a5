"""SMT-LIB text for Horn systems.

``rule`` dialect: ``declare-rel`` / ``rule`` / ``query`` as understood by the
z3 fixedpoint front end. ``horn`` dialect: plain SMT-LIB2 under
``(set-logic HORN)`` where rules are universally quantified assertions and
rules concluding ``Error`` conclude ``false``. Note the flipped reading of the
answer: in the ``horn`` dialect ``sat`` means Error is unreachable.
"""

from __future__ import annotations

from lustrehorn.horn.encoder import HornSystem, Rule
from lustrehorn.horn.terms import App, sorted_binders, symbol, to_smt

DIALECTS = ("rule", "horn")


def _quantified(rule: Rule, head: str) -> str:
    vs = rule.variables
    impl = f"(=> {to_smt(rule.body)} {head})"
    if not vs:
        return impl
    return f"(forall ({sorted_binders(vs)}) {impl})"


def render_rule_dialect(h: HornSystem) -> str:
    lines = []
    for r in h.relations:
        lines.append(f"(declare-rel {symbol(r.name)} ({' '.join(r.sorts)}))")
    for d in h.definitions:
        lines.append(d.to_smt())
    for rule in h.rules:
        if rule.label:
            lines.append(f"; {rule.label}")
        lines.append(f"(rule {_quantified(rule, to_smt(rule.head))})")
    lines.append(f"(query {symbol(h.query)})")
    return "\n".join(lines) + "\n"


def render_horn_dialect(h: HornSystem) -> str:
    lines = ["(set-logic HORN)"]
    for r in h.relations:
        if r.name == h.query:
            continue
        lines.append(f"(declare-fun {symbol(r.name)} ({' '.join(r.sorts)}) Bool)")
    for d in h.definitions:
        lines.append(d.to_smt())
    for rule in h.rules:
        head = "false" if rule.head.rel == h.query else to_smt(rule.head)
        if rule.label:
            lines.append(f"; {rule.label}")
        lines.append(f"(assert {_quantified(rule, head)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def render_smtlib(h, dialect: str = "rule") -> str:
    """Deterministic text for a :class:`HornSystem` or a monolithic system."""
    if not isinstance(h, HornSystem):
        h = h.horn()
    if dialect == "rule":
        return render_rule_dialect(h)
    if dialect == "horn":
        return render_horn_dialect(h)
    raise ValueError(f"unknown dialect {dialect!r}; expected one of {DIALECTS}")


def head_is_error(rule: Rule, h: HornSystem) -> bool:
    return isinstance(rule.head, App) and rule.head.rel == h.query
