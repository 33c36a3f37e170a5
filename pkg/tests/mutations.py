"""Deliberately broken encodings, used to show the checks can fail."""

from dataclasses import replace

from lustrehorn.horn.encoder import STATE, STATE_P, HornSystem
from lustrehorn.horn.terms import App


def swap_primes(h: HornSystem, node: str | None = None) -> HornSystem:
    """Exchange current and next state in the head of transition rules.

    Swapping every node at once can cancel out: a caller that reads a swapped
    callee through its own swapped head ends up with the original meaning.
    Name a single node to get a genuine mutation.
    """
    rules = []
    for rule in h.rules:
        rel = h.relation(rule.head.rel)
        if rel.kind == "trans" and (node is None or rel.node == node):
            cur = [i for i, p in enumerate(rel.params) if p.role == STATE]
            nxt = [i for i, p in enumerate(rel.params) if p.role == STATE_P]
            args = list(rule.head.args)
            for i, j in zip(cur, nxt):
                args[i], args[j] = args[j], args[i]
            rule = replace(rule, head=App(rule.head.rel, tuple(args)))
        rules.append(rule)
    return replace(h, rules=tuple(rules))
