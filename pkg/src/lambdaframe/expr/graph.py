"""Computation graphs and their line-oriented text form.

Text form, one statement per line (``#`` starts a comment)::

    def sq(a) = a * a;
    define pt2 = sq(pt);
    filter pt2 > 4;
    count 1;
    mean 2 pt;
    histo1d 3 pt 50 0 100;

Unprefixed define/filter statements chain off the previous one; actions attach to
the current chain position. Branches use an explicit prefix::

    node 7 parent root: filter x < 0.5;
    node 8 parent 7: count 8;
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .ast import Expr, format_expr
from .parser import ParseError, Token, TokenStream, _unexpected, parse_expression, tokenize

ROOT = 0


@dataclass(frozen=True)
class HelperFunction:
    name: str
    params: tuple[str, ...]
    body: Expr

    def to_text(self) -> str:
        return f"def {self.name}({', '.join(self.params)}) = {format_expr(self.body)};"


@dataclass(frozen=True)
class Define:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Filter:
    expr: Expr


@dataclass(frozen=True)
class Count:
    pass


@dataclass(frozen=True)
class Sum:
    column: str


@dataclass(frozen=True)
class Mean:
    column: str


@dataclass(frozen=True)
class Histo1D:
    name: str
    nbins: int
    lo: float
    hi: float
    column: str


NodeKind = Union[Define, Filter, Count, Sum, Mean, Histo1D]
ACTION_KINDS = (Count, Sum, Mean, Histo1D)


@dataclass(frozen=True)
class GraphNode:
    id: int
    parent: int  # ROOT for the dataset source
    kind: NodeKind

    @property
    def is_action(self) -> bool:
        return isinstance(self.kind, ACTION_KINDS)


@dataclass(frozen=True)
class ComputationGraph:
    nodes: tuple[GraphNode, ...]
    helpers: tuple[HelperFunction, ...]
    source: str

    @property
    def actions(self) -> list[GraphNode]:
        return [n for n in self.nodes if n.is_action]

    def node(self, node_id: int) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def children(self) -> dict[int, list[GraphNode]]:
        out: dict[int, list[GraphNode]] = {ROOT: []}
        for n in self.nodes:
            out.setdefault(n.id, [])
            out.setdefault(n.parent, []).append(n)
        return out

    def path_to_root(self, node_id: int) -> list[GraphNode]:
        """Nodes from the root down to ``node_id`` inclusive."""
        by_id = {n.id: n for n in self.nodes}
        path = []
        cur = node_id
        while cur != ROOT:
            n = by_id[cur]
            path.append(n)
            cur = n.parent
        return path[::-1]


def _format_kind(node: GraphNode) -> str:
    k = node.kind
    if isinstance(k, Define):
        return f"define {k.name} = {format_expr(k.expr)};"
    if isinstance(k, Filter):
        return f"filter {format_expr(k.expr)};"
    if isinstance(k, Count):
        return f"count {node.id};"
    if isinstance(k, Sum):
        return f"sum {node.id} {k.column};"
    if isinstance(k, Mean):
        return f"mean {node.id} {k.column};"
    if isinstance(k, Histo1D):
        return f"histo1d {node.id} {k.column} {k.nbins} {k.lo!r} {k.hi!r};"
    raise TypeError(k)


def format_graph(g: ComputationGraph) -> str:
    lines = [h.to_text() for h in g.helpers]
    for n in g.nodes:
        parent = "root" if n.parent == ROOT else str(n.parent)
        lines.append(f"node {n.id} parent {parent}: {_format_kind(n)}")
    return "\n".join(lines) + "\n"


def parse_helpers(src: str) -> tuple[HelperFunction, ...]:
    """Parse a header: only ``def`` statements are allowed."""
    ts = TokenStream(tokenize(src))
    out = []
    while ts.peek().kind != "eof":
        tok = ts.peek()
        if tok.kind != "ident" or tok.text != "def":
            raise _unexpected(tok, frozenset({"def"}))
        out.append(_parse_def(ts))
    return tuple(out)


def parse_graph(src: str) -> ComputationGraph:
    """Parse the text form.

    Define/filter nodes without an explicit ``node`` prefix get ids above every id
    written in the text, so they never collide with action ids.
    """
    ts = TokenStream(tokenize(src))
    helpers: list[HelperFunction] = []
    stmts = []  # (token, explicit_id, explicit_parent, kind, action_id)

    while ts.peek().kind != "eof":
        tok = ts.peek()
        if tok.kind != "ident":
            raise _unexpected(tok, frozenset({"statement"}))
        if tok.text == "def":
            helpers.append(_parse_def(ts))
            continue
        explicit_id = explicit_parent = None
        if tok.text == "node":
            ts.next()
            explicit_id = _int(ts)
            kw = ts.expect_kind("ident", "parent")
            if kw.text != "parent":
                raise _unexpected(kw, frozenset({"parent"}))
            if ts.peek().kind == "ident" and ts.peek().text == "root":
                ts.next()
                explicit_parent = ROOT
            else:
                explicit_parent = _int(ts)
            ts.expect(":")
        stmt = ts.peek()
        kind, action_id = _parse_statement(ts)
        if action_id is not None and explicit_id is not None and explicit_id != action_id:
            raise ParseError(f"node id {explicit_id} does not match action id {action_id}", stmt.line, stmt.column)
        stmts.append((stmt, explicit_id, explicit_parent, kind, action_id))

    written = [i for _, e, _, _, a in stmts for i in (e, a) if i is not None]
    next_id = max(written, default=0) + 1
    nodes: list[GraphNode] = []
    ids: dict[int, GraphNode] = {}
    current = ROOT
    for stmt, explicit_id, explicit_parent, kind, action_id in stmts:
        if action_id is not None:
            node_id = action_id
        elif explicit_id is not None:
            node_id = explicit_id
        else:
            node_id, next_id = next_id, next_id + 1
        if node_id == ROOT or node_id in ids:
            raise ParseError(f"duplicate or reserved node id {node_id}", stmt.line, stmt.column)
        parent = current if explicit_parent is None else explicit_parent
        if parent != ROOT:
            if parent not in ids:
                raise ParseError(f"unknown parent node {parent}", stmt.line, stmt.column)
            if ids[parent].is_action:
                raise ParseError(f"parent {parent} is an action", stmt.line, stmt.column)
        node = GraphNode(node_id, parent, kind)
        nodes.append(node)
        ids[node_id] = node
        if not node.is_action:
            current = node_id
    return ComputationGraph(tuple(nodes), tuple(helpers), src)


def _parse_def(ts: TokenStream) -> HelperFunction:
    ts.next()  # def
    name = ts.expect_kind("ident", "identifier").text
    ts.expect("(")
    params = []
    if not ts.at(")"):
        params.append(ts.expect_kind("ident", "identifier").text)
        while ts.at(","):
            ts.next()
            params.append(ts.expect_kind("ident", "identifier").text)
    ts.expect(")")
    ts.expect("=")
    body = parse_expression(ts)
    ts.expect(";")
    return HelperFunction(name, tuple(params), body)


def _int(ts: TokenStream) -> int:
    tok = ts.expect_kind("number", "integer")
    if not tok.text.isdigit():
        raise ParseError(f"expected integer, got {tok.text!r}", tok.line, tok.column)
    return int(tok.text)


def _float(ts: TokenStream) -> float:
    neg = False
    if ts.at("-"):
        ts.next()
        neg = True
    v = float(ts.expect_kind("number").text)
    return -v if neg else v


def _parse_statement(ts: TokenStream) -> tuple[NodeKind, int | None]:
    tok: Token = ts.next()
    word = tok.text if tok.kind == "ident" else None
    if word == "define":
        name = ts.expect_kind("ident", "identifier").text
        ts.expect("=")
        kind: NodeKind = Define(name, parse_expression(ts))
        action_id = None
    elif word == "filter":
        kind = Filter(parse_expression(ts))
        action_id = None
    elif word == "count":
        action_id = _int(ts)
        kind = Count()
    elif word in ("sum", "mean"):
        action_id = _int(ts)
        col = ts.expect_kind("ident", "column").text
        kind = Sum(col) if word == "sum" else Mean(col)
    elif word == "histo1d":
        action_id = _int(ts)
        col = ts.expect_kind("ident", "column").text
        nbins = _int(ts)
        lo = _float(ts)
        hi = _float(ts)
        kind = Histo1D(f"h{action_id}", nbins, lo, hi, col)
    else:
        raise _unexpected(tok, frozenset({"define", "filter", "count", "sum", "mean", "histo1d", "node", "def"}))
    ts.expect(";")
    return kind, action_id
