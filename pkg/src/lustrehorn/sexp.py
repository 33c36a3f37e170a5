"""Minimal s-expression reader for SMT-LIB solver output.

Atoms are returned as :class:`str` (symbols, numerals, keywords) or
:class:`Quoted` (``|...|`` symbols, which may contain any character).
Lists are returned as Python lists.
"""

from __future__ import annotations

import re

__all__ = ["Quoted", "SExpError", "parse", "parse_all", "dumps"]


class SExpError(ValueError):
    pass


class Quoted(str):
    """A ``|quoted|`` symbol; compares equal to its bare text."""


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>;[^\n]*)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<quoted>\|[^|]*\|)
  | (?P<string>"(?:[^"]|"")*")
  | (?P<atom>[^\s()|";]+)
    """,
    re.VERBOSE,
)


def _tokens(text: str):
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SExpError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        if kind == "quoted":
            yield "atom", Quoted(m.group()[1:-1])
        else:
            yield kind, m.group()


def parse_all(text: str) -> list:
    """Parse every top-level s-expression in ``text``."""
    stack: list[list] = [[]]
    for kind, tok in _tokens(text):
        if kind == "lpar":
            stack.append([])
        elif kind == "rpar":
            if len(stack) == 1:
                raise SExpError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SExpError("unbalanced '(': input ended inside a list")
    return stack[0]


def parse(text: str):
    items = parse_all(text)
    if len(items) != 1:
        raise SExpError(f"expected exactly one s-expression, found {len(items)}")
    return items[0]


def dumps(sx) -> str:
    if isinstance(sx, list):
        return "(" + " ".join(dumps(x) for x in sx) + ")"
    if isinstance(sx, Quoted):
        return f"|{sx}|"
    return str(sx)
