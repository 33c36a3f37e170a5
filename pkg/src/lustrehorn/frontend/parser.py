"""Recursive-descent parser for the Lustre v4 subset.

Operator precedence, loosest first::

    ->            right
    =>            right
    or xor        left
    and           left
    = <> < <= > >=   non-associative
    + -           left
    *             left
    not - pre     prefix
    if/then/else, literals, variables, calls, parentheses

Synchronous-observer properties are written as special comments inside a node
body: ``--!PROPERTY : <expr>;``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from lustrehorn.frontend.ast import (
    Arrow, BinOp, BoolLit, Call, Equation, Expr, IntLit, Ite, Node, Pos, Pre,
    Program, TupleExpr, UnOp, VarDecl, VarRef,
)
from lustrehorn.frontend.diagnostics import Diagnostic, ParseError, UnsupportedFeature

__all__ = ["parse_program", "tokenize", "Token"]

KEYWORDS = {
    "node", "function", "returns", "var", "let", "tel", "true", "false",
    "not", "and", "or", "xor", "pre", "if", "then", "else", "bool", "int",
}
# Recognised so that they can be rejected with a precise message.
UNSUPPORTED = {
    "when": "clocks (`when`)",
    "current": "clocks (`current`)",
    "merge": "clocks (`merge`)",
    "every": "clocked node activation (`every`)",
    "fby": "the `fby` operator",
    "real": "real arithmetic",
    "type": "user-defined types",
    "const": "constant declarations",
    "assert": "assertions",
    "div": "integer division",
    "mod": "integer modulo",
    "imported": "imported nodes",
    "include": "includes",
    "struct": "records",
    "enum": "enumerated types",
}


@dataclass(frozen=True)
class Token:
    kind: str  # ident keyword int sym prop eof bad
    text: str
    pos: Pos


_SPEC = [
    ("prop", r"--!PROPERTY\b"),
    ("comment", r"--[^\n]*"),
    ("bcomment", r"\(\*.*?\*\)|/\*.*?\*/"),
    ("ws", r"\s+"),
    ("float", r"\d+\.\d*(?:[eE][-+]?\d+)?"),
    ("int", r"\d+"),
    ("ident", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("sym", r"->|=>|<>|<=|>=|[=<>+\-*/(),;:\[\]^.#|]"),
]
_LEXER = re.compile("|".join(f"(?P<{k}>{p})" for k, p in _SPEC), re.DOTALL)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start = 1, 0
    i = 0
    while i < len(source):
        m = _LEXER.match(source, i)
        col = i - line_start + 1
        if m is None:
            raise ParseError([Diagnostic("E-LEX", f"unexpected character {source[i]!r}", line, col)])
        kind, text = m.lastgroup, m.group()
        pos = Pos(line, col)
        if kind in ("ident",) and (text in KEYWORDS or text in UNSUPPORTED):
            kind = "keyword"
        if kind == "float":
            raise UnsupportedFeature([Diagnostic("E-UNSUPPORTED", "unsupported feature: real arithmetic", line, col)])
        if kind not in ("ws", "comment", "bcomment"):
            tokens.append(Token(kind, text, pos))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = i + text.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", Pos(line, i - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers ------------------------------------------------------
    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.cur
        return t.kind in ("keyword", "sym", "prop") and t.text in texts

    def advance(self) -> Token:
        t = self.cur
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.cur
        self.check_unsupported(tok)
        raise ParseError([Diagnostic("E-SYNTAX", msg, tok.pos.line, tok.pos.col)])

    def check_unsupported(self, tok: Token):
        feature = None
        if tok.kind == "keyword" and tok.text in UNSUPPORTED:
            feature = UNSUPPORTED[tok.text]
        elif tok.kind == "sym" and tok.text in ("[", "]", "^"):
            feature = "arrays"
        elif tok.kind == "sym" and tok.text == "/":
            feature = "division"
        elif tok.kind == "sym" and tok.text == "#":
            feature = "the `#` operator"
        if feature:
            raise UnsupportedFeature(
                [Diagnostic("E-UNSUPPORTED", f"unsupported feature: {feature}", tok.pos.line, tok.pos.col)]
            )

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.cur.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.cur.kind != "ident":
            found = self.cur.text or "end of input"
            self.error(f"expected identifier, found {found!r}")
        return self.advance()

    # -- declarations -------------------------------------------------------
    def program(self) -> list[Node]:
        nodes = []
        while self.cur.kind != "eof":
            nodes.append(self.node())
        return nodes

    def node(self) -> Node:
        if not self.at("node", "function"):
            self.error("expected 'node'")
        start = self.advance()
        name = self.ident().text
        self.expect("(")
        inputs = self.decl_list(")")
        self.expect(")")
        self.expect("returns")
        self.expect("(")
        outputs = self.decl_list(")")
        self.expect(")")
        if self.at(";"):
            self.advance()
        locals_: list[VarDecl] = []
        if self.at("var"):
            self.advance()
            while self.cur.kind == "ident":
                locals_.extend(self.decl_group())
                self.expect(";")
        self.expect("let")
        eqs: list[Equation] = []
        props: list[Expr] = []
        while not self.at("tel"):
            if self.cur.kind == "eof":
                self.error("expected 'tel'")
            if self.at("--!PROPERTY"):
                self.advance()
                self.expect(":")
                props.append(self.expr())
                self.expect(";")
            else:
                eqs.append(self.equation())
        self.expect("tel")
        if self.at(";", "."):
            self.advance()
        return Node(name, tuple(inputs), tuple(outputs), tuple(locals_), tuple(eqs), tuple(props), start.pos)

    def decl_list(self, closer: str) -> list[VarDecl]:
        out: list[VarDecl] = []
        if self.at(closer):
            return out
        out.extend(self.decl_group())
        while self.at(";"):
            self.advance()
            if self.at(closer):
                break
            out.extend(self.decl_group())
        return out

    def decl_group(self) -> list[VarDecl]:
        names = [self.ident()]
        while self.at(","):
            self.advance()
            names.append(self.ident())
        self.expect(":")
        ty = self.type_()
        return [VarDecl(t.text, ty, t.pos) for t in names]

    def type_(self) -> str:
        tok = self.cur
        if self.at("bool", "int"):
            self.advance()
            if self.at("^", "["):
                self.check_unsupported(self.cur)
            return tok.text
        if self.at("("):
            raise UnsupportedFeature(
                [Diagnostic("E-UNSUPPORTED", "unsupported feature: tuple types", tok.pos.line, tok.pos.col)]
            )
        self.check_unsupported(tok)
        self.error(f"unknown type {tok.text!r}")

    # -- equations ----------------------------------------------------------
    def equation(self) -> Equation:
        start = self.cur
        if start.kind == "keyword":
            self.check_unsupported(start)
        paren = self.at("(")
        if paren:
            self.advance()
        names = [self.ident().text]
        while self.at(","):
            self.advance()
            names.append(self.ident().text)
        if paren:
            self.expect(")")
        self.expect("=")
        rhs = self.expr()
        self.expect(";")
        return Equation(tuple(names), rhs, start.pos)

    # -- expressions --------------------------------------------------------
    def expr(self) -> Expr:
        return self.arrow()

    def arrow(self) -> Expr:
        left = self.impl()
        if self.at("->"):
            tok = self.advance()
            return Arrow(left, self.arrow(), tok.pos)
        return left

    def impl(self) -> Expr:
        left = self.or_()
        if self.at("=>"):
            tok = self.advance()
            return BinOp("=>", left, self.impl(), tok.pos)
        return left

    def or_(self) -> Expr:
        left = self.and_()
        while self.at("or", "xor"):
            tok = self.advance()
            left = BinOp(tok.text, left, self.and_(), tok.pos)
        return left

    def and_(self) -> Expr:
        left = self.cmp()
        while self.at("and"):
            tok = self.advance()
            left = BinOp("and", left, self.cmp(), tok.pos)
        return left

    def cmp(self) -> Expr:
        left = self.add()
        if self.at("=", "<>", "<", "<=", ">", ">="):
            tok = self.advance()
            left = BinOp(tok.text, left, self.add(), tok.pos)
            if self.at("=", "<>", "<", "<=", ">", ">="):
                self.error("comparison operators are non-associative; add parentheses")
        return left

    def add(self) -> Expr:
        left = self.mul()
        while self.at("+", "-"):
            tok = self.advance()
            left = BinOp(tok.text, left, self.mul(), tok.pos)
        return left

    def mul(self) -> Expr:
        left = self.unary()
        while self.at("*"):
            tok = self.advance()
            left = BinOp("*", left, self.unary(), tok.pos)
        if self.at("/", "div", "mod"):
            self.check_unsupported(self.cur)
        return left

    def unary(self) -> Expr:
        tok = self.cur
        if self.at("not"):
            self.advance()
            return UnOp("not", self.unary(), tok.pos)
        if self.at("-"):
            self.advance()
            arg = self.unary()
            if isinstance(arg, IntLit):
                return IntLit(-arg.value, tok.pos)
            return UnOp("-", arg, tok.pos)
        if self.at("pre"):
            self.advance()
            return Pre(self.unary(), tok.pos)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.cur
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text), tok.pos)
        if self.at("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true", tok.pos)
        if self.at("if"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            return Ite(cond, then, self.expr(), tok.pos)
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                self.expect(")")
                return Call(tok.text, tuple(args), tok.pos)
            return VarRef(tok.text, tok.pos)
        if self.at("("):
            self.advance()
            items = [self.expr()]
            while self.at(","):
                self.advance()
                items.append(self.expr())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return TupleExpr(tuple(items), tok.pos)
        self.check_unsupported(tok)
        found = tok.text or "end of input"
        self.error(f"expected expression, found {found!r}")


def _call_graph(nodes: Iterable[Node]) -> dict[str, set[str]]:
    from lustrehorn.frontend.ast import calls_in

    graph: dict[str, set[str]] = {}
    for n in nodes:
        callees = set()
        for eq in n.equations:
            callees.update(c.node for c in calls_in(eq.rhs))
        for p in n.properties:
            callees.update(c.node for c in calls_in(p))
        graph[n.name] = callees
    return graph


def parse_program(source: str, main: str | None = None) -> Program:
    """Parse Lustre source into a :class:`Program`.

    The top node is ``main`` when given; otherwise the last-defined node that
    no other node calls.
    """
    nodes = _Parser(tokenize(source)).program()
    diags = []
    seen: dict[str, Node] = {}
    for n in nodes:
        if n.name in seen:
            diags.append(
                Diagnostic("E-DUPNODE", f"duplicate node name {n.name!r}", n.pos.line, n.pos.col)
            )
        seen[n.name] = n
    if diags:
        raise ParseError(diags)
    if not nodes:
        raise ParseError([Diagnostic("E-EMPTY", "program contains no node")])
    graph = _call_graph(nodes)
    called = set().union(*graph.values())
    if main is None:
        roots = [n.name for n in nodes if n.name not in called]
        if not roots:
            raise ParseError([Diagnostic("E-MAIN", "no top node: every node is called by another")])
        main = roots[-1]
    elif main not in seen:
        raise ParseError([Diagnostic("E-MAIN", f"top node {main!r} is not defined")])
    elif main in called:
        raise ParseError([Diagnostic("E-MAIN", f"top node {main!r} is called by another node")])
    return Program(tuple(nodes), main)
