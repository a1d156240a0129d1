"""Tokenizer and Pratt parser for the row expression language."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import Binary, Call, Col, Expr, Num, Unary


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.line = line
        self.column = column
        self.expected = expected
        suffix = f"; expected one of {sorted(expected)}" if expected else ""
        super().__init__(f"{message} at line {line}, column {column}{suffix}")


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, op, eof
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||<=|>=|==|!=|[-+*/%<>!(),=;:])
    """,
    re.VERBOSE,
)


def tokenize(src: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# Binding powers, loosest first.
_INFIX = {
    "||": 10,
    "&&": 20,
    "<": 30, "<=": 30, ">": 30, ">=": 30, "==": 30, "!=": 30,
    "+": 40, "-": 40,
    "*": 50, "/": 50, "%": 50,
}
_PREFIX_BP = 60
_START = frozenset({"number", "identifier", "(", "-", "!"})


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text == text

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise _unexpected(tok, frozenset({text}))
        return self.next()

    def expect_kind(self, kind: str, label: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise _unexpected(tok, frozenset({label or kind}))
        return self.next()


def _unexpected(tok: Token, expected: frozenset[str]) -> ParseError:
    what = "end of input" if tok.kind == "eof" else repr(tok.text)
    return ParseError(f"unexpected {what}", tok.line, tok.column, expected)


def parse_expression(ts: TokenStream, min_bp: int = 0) -> Expr:
    tok = ts.next()
    left = _nud(ts, tok)
    while True:
        op = ts.peek()
        if op.kind != "op" or op.text not in _INFIX:
            break
        bp = _INFIX[op.text]
        if bp <= min_bp:
            break
        ts.next()
        # bp (not bp - 1) on the right side gives left associativity
        right = parse_expression(ts, bp)
        left = Binary(op.text, left, right, pos=(op.line, op.column))
    return left


def _nud(ts: TokenStream, tok: Token) -> Expr:
    pos = (tok.line, tok.column)
    if tok.kind == "number":
        return Num(float(tok.text), pos=pos)
    if tok.kind == "ident":
        if ts.at("("):
            ts.next()
            args = []
            if not ts.at(")"):
                args.append(parse_expression(ts))
                while ts.at(","):
                    ts.next()
                    args.append(parse_expression(ts))
            if not ts.at(")"):
                raise _unexpected(ts.peek(), frozenset({",", ")"}))
            ts.next()
            return Call(tok.text, tuple(args), pos=pos)
        return Col(tok.text, pos=pos)
    if tok.kind == "op" and tok.text in ("-", "!"):
        return Unary(tok.text, parse_expression(ts, _PREFIX_BP), pos=pos)
    if tok.kind == "op" and tok.text == "(":
        inner = parse_expression(ts)
        ts.expect(")")
        return inner
    raise _unexpected(tok, _START)


def parse_expr(src: str) -> Expr:
    ts = TokenStream(tokenize(src))
    e = parse_expression(ts)
    tok = ts.peek()
    if tok.kind != "eof":
        raise _unexpected(tok, frozenset({"operator", "end of input"}))
    return e
