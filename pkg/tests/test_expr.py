import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lambdaframe.expr import (
    Binary, Call, Col, Count, Define, Filter, Histo1D, Mean, Num, ParseError, TypeCheckError, Unary,
    EvalError, Evaluator, eval_expr, format_expr, format_graph, parse_expr, parse_graph, parse_helpers, typecheck,
)
from lambdaframe.expr.graph import ROOT


# -- parsing -----------------------------------------------------------------

def test_precedence_and_associativity():
    assert parse_expr("a + b * c") == Binary("+", Col("a"), Binary("*", Col("b"), Col("c")))
    assert parse_expr("a - b - c") == Binary("-", Binary("-", Col("a"), Col("b")), Col("c"))
    assert parse_expr("a / b % c") == Binary("%", Binary("/", Col("a"), Col("b")), Col("c"))
    assert parse_expr("a < b && c > d || e == f") == Binary(
        "||",
        Binary("&&", Binary("<", Col("a"), Col("b")), Binary(">", Col("c"), Col("d"))),
        Binary("==", Col("e"), Col("f")),
    )
    assert parse_expr("-a * b") == Binary("*", Unary("-", Col("a")), Col("b"))
    assert parse_expr("!(a < b)") == Unary("!", Binary("<", Col("a"), Col("b")))


def test_calls_and_numbers():
    assert parse_expr("pow(x, 2.5e1)") == Call("pow", (Col("x"), Num(25.0)))
    assert parse_expr("f()") == Call("f", ())
    assert parse_expr("(1)") == Num(1.0)


def test_parse_error_position_and_expected():
    with pytest.raises(ParseError) as ei:
        parse_expr("pt >")
    e = ei.value
    assert (e.line, e.column) == (1, 5)
    assert {"(", "-", "!", "number", "identifier"} <= set(e.expected)


@pytest.mark.parametrize("src", ["", "a +", "(a", "a b", "f(a,", "1 ? 2", "a ) b"])
def test_malformed_inputs_raise(src):
    with pytest.raises(ParseError):
        parse_expr(src)


names = st.sampled_from(["a", "b", "pt", "x_1"])
leaves = st.one_of(
    names.map(Col),
    st.floats(min_value=0, max_value=1e12, allow_nan=False, allow_infinity=False).map(Num),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"]),
                  children, children).map(lambda t: Binary(*t)),
        st.tuples(st.sampled_from(["-", "!"]), children).map(lambda t: Unary(*t)),
        st.tuples(st.sampled_from(["sqrt", "max", "f"]), st.lists(children, max_size=3)).map(
            lambda t: Call(t[0], tuple(t[1]))
        ),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@given(exprs)
def test_format_parse_round_trip(e):
    assert parse_expr(format_expr(e)) == e


# -- evaluation ----------------------------------------------------------------

def test_scalar_semantics():
    row = {"a": 7.0, "b": 2.0}
    assert eval_expr(parse_expr("a % b"), row) == 1.0
    assert eval_expr(parse_expr("-a % b"), row) == -1.0  # sign of the dividend
    assert eval_expr(parse_expr("a / 0"), row) == math.inf
    assert math.isnan(eval_expr(parse_expr("sqrt(0 - a)"), row))
    assert eval_expr(parse_expr("a > b && !(a == b)"), row) is True
    assert eval_expr(parse_expr("max(a, b) - min(a, b)"), row) == 5.0


def test_strict_mode_rejects_domain_errors():
    with pytest.raises(EvalError):
        eval_expr(parse_expr("sqrt(0 - a)"), {"a": 1.0}, strict=True)
    with pytest.raises(EvalError):
        eval_expr(parse_expr("x"), {})


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_arithmetic_matches_python(a, b, c):
    e = parse_expr("a * b + c - a / 4")
    assert eval_expr(e, {"a": a, "b": b, "c": c}) == a * b + c - a / 4
    assert eval_expr(parse_expr("a < b || c >= a"), {"a": a, "b": b, "c": c}) == (a < b or c >= a)


def test_vectorized_matches_scalar():
    e = parse_expr("sq(a) + abs(b - a) * 0.5")
    helpers = {h.name: h for h in parse_helpers("def sq(x) = x * x;")}
    rng = np.random.default_rng(1)
    cols = {"a": rng.random(50), "b": rng.random(50)}
    vec = Evaluator(helpers).eval(e, cols.__getitem__)
    for i in range(50):
        assert vec[i] == eval_expr(e, {"a": cols["a"][i], "b": cols["b"][i]}, helpers)


# -- graphs ------------------------------------------------------------------

SRC = """
def sq(a) = a * a;   # helper
define pt2 = sq(pt);
filter pt2 > 4;
count 1;
mean 2 pt;
histo1d 3 pt 50 0 100;
node 7 parent root: filter pt < 0.5;
node 8 parent 7: count 8;
"""


def test_graph_structure():
    g = parse_graph(SRC)
    kinds = [type(n.kind) for n in g.nodes]
    assert kinds.count(Count) == 2 and Mean in kinds and Histo1D in kinds
    define = next(n for n in g.nodes if isinstance(n.kind, Define))
    assert define.parent == ROOT
    filt = next(n for n in g.nodes if isinstance(n.kind, Filter) and n.parent == define.id)
    assert {a.parent for a in g.actions if a.id in (1, 2, 3)} == {filt.id}
    assert g.node(8).parent == 7
    assert [h.name for h in g.helpers] == ["sq"]
    # auto-assigned ids never collide with written ones
    assert len({n.id for n in g.nodes}) == len(g.nodes)


def test_graph_round_trip():
    g = parse_graph(SRC)
    again = parse_graph(format_graph(g))
    assert again.nodes == g.nodes and again.helpers == g.helpers


def test_graph_errors():
    with pytest.raises(ParseError):
        parse_graph("count 1;\ncount 1;\n")
    with pytest.raises(ParseError):
        parse_graph("histo1d 1 x 10 0;\n")
    with pytest.raises(ParseError):
        parse_graph("count 1;\nnode 5 parent 1: count 5;\n")
    with pytest.raises(ParseError) as ei:
        parse_graph("count 1;\nfrobnicate 2;\n")
    assert ei.value.line == 2


# -- type checking -----------------------------------------------------------

def test_typecheck_accepts_sound_graph():
    typecheck(parse_graph(SRC), ["pt"])


@pytest.mark.parametrize(
    "src, message",
    [
        ("filter x + 1;\ncount 1;\n", "boolean required"),
        ("define y = x > 1;\ncount 1;\n", "numeric"),
        ("mean 1 nope;\n", "unknown column"),
        ("filter sqrt(x, x) > 1;\ncount 1;\n", "takes 1"),
        ("filter g(x) > 1;\ncount 1;\n", "unknown function"),
        ("define x = 1;\ncount 1;\n", "already defined"),
        ("filter x > 1 && x;\ncount 1;\n", "boolean operands"),
        ("define y = x;\n", "no action"),
        ("histo1d 1 x 10 5 5;\n", "lo < hi"),
    ],
)
def test_typecheck_rejections(src, message):
    with pytest.raises(TypeCheckError) as ei:
        typecheck(parse_graph(src), ["x"])
    assert message in str(ei.value)


def test_typecheck_reports_node_id():
    g = parse_graph("count 1;\nnode 9 parent root: filter x;\nnode 10 parent 9: count 10;\n")
    with pytest.raises(TypeCheckError) as ei:
        typecheck(g, ["x"])
    assert ei.value.node_id == 9


def test_helpers_from_headers_are_visible():
    g = parse_graph("filter corr(x, x) < 0.5;\ncount 1;\n")
    with pytest.raises(TypeCheckError):
        typecheck(g, ["x"])
    typecheck(g, ["x"], parse_helpers("def corr(a, b) = abs(a - b);"))
