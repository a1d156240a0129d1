import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lambdaframe.accumulators import CountAcc, HistoAcc, MeanAcc, PartialResult, ShapeMismatch, SumAcc, reduce
from lambdaframe.dataset import layout_from_spans, synth_value
from lambdaframe.driver import execute_sequential
from lambdaframe.expr import eval_expr, parse_graph, parse_helpers

from oracles import histogram

finite = st.floats(-50, 150, allow_nan=False)


@given(st.lists(st.one_of(finite, st.just(math.nan), st.just(100.0), st.just(0.0)), max_size=200),
       st.integers(1, 40))
def test_histogram_matches_brute_force(values, nbins):
    h = HistoAcc(nbins, 0.0, 100.0).fill(np.array(values, dtype=float))
    counts, under, over = histogram(values, nbins, 0.0, 100.0)
    assert list(h.counts) == counts
    assert (h.underflow, h.overflow) == (under, over)
    assert sum(h.counts) + h.underflow + h.overflow == len(values)


def test_histogram_edges_are_half_open():
    h = HistoAcc(4, 0.0, 1.0).fill(np.array([0.0, 0.25, 0.5, 0.75, 1.0, -0.0001]))
    assert h.counts == (1, 1, 1, 1)
    assert (h.underflow, h.overflow) == (1, 1)


def test_reduce_examples():
    a = PartialResult({1: HistoAcc(3, 0, 3, (1, 1, 1)), 2: MeanAcc(10.0, 4)})
    b = PartialResult({1: HistoAcc(3, 0, 3, (0, 2, 0)), 2: MeanAcc(2.0, 1)})
    r = reduce(a, b)
    assert r.actions[1].counts == (1, 3, 1)
    assert r.actions[2] == MeanAcc(12.0, 5)
    assert r.finalize()[2] == 2.4


def test_identity_element():
    g = parse_graph("count 1;\nsum 2 x;\nmean 3 x;\nhisto1d 4 x 5 0 1;\n")
    a = PartialResult({1: CountAcc(3), 2: SumAcc(1.5), 3: MeanAcc(1.5, 3), 4: HistoAcc(5, 0, 1, (1, 0, 2, 0, 0), 0, 0)})
    assert reduce(a, PartialResult.identity(g)) == a
    assert reduce(PartialResult.identity(g), a) == a


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch) as ei:
        reduce(PartialResult({1: HistoAcc(3, 0, 1)}), PartialResult({1: HistoAcc(4, 0, 1)}))
    assert ei.value.action_id == 1
    with pytest.raises(ShapeMismatch):
        reduce(PartialResult({1: CountAcc()}), PartialResult({2: CountAcc()}))
    with pytest.raises(ShapeMismatch):
        reduce(PartialResult({1: CountAcc()}), PartialResult({1: SumAcc()}))


partials = st.builds(
    lambda n, s, m, k, counts, u, o: PartialResult({
        1: CountAcc(n), 2: SumAcc(s), 3: MeanAcc(m, k), 4: HistoAcc(4, 0.0, 1.0, tuple(counts), u, o),
    }),
    st.integers(0, 10**6), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.integers(0, 1000),
    st.lists(st.integers(0, 100), min_size=4, max_size=4), st.integers(0, 9), st.integers(0, 9),
)


def _close(x, y):
    for aid in x.actions:
        a, b = x.actions[aid], y.actions[aid]
        if isinstance(a, (SumAcc, MeanAcc)):
            assert math.isclose(a.total, b.total, rel_tol=1e-12, abs_tol=1e-6)
            if isinstance(a, MeanAcc):
                assert a.n == b.n
        else:
            assert a == b


@given(st.lists(partials, min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_reduce_order_and_grouping_independent(parts, rnd):
    left = parts[0]
    for p in parts[1:]:
        left = reduce(left, p)
    shuffled = parts[:]
    rnd.shuffle(shuffled)
    # right-leaning parenthesization of a permutation
    right = shuffled[-1]
    for p in reversed(shuffled[:-1]):
        right = reduce(p, right)
    _close(left, right)


@given(partials)
def test_encode_round_trip(p):
    assert PartialResult.decode(p.encode()) == p


def test_executor_matches_row_by_row_oracle():
    d = layout_from_spans("o", [[7, 13], [5, 25]], columns=("a", "b"), seed=5)
    helpers = parse_helpers("def sq(x) = x * x;")
    g = parse_graph(
        "define s = sq(a) + b;\n"
        "filter a < 0.7;\n"
        "count 1;\nsum 2 s;\nmean 3 b;\nhisto1d 4 s 7 0 1.5;\n"
        "node 9 parent root: filter b > 0.5 || a < 0.1;\n"
        "node 10 parent 9: count 10;\n"
    )
    got = execute_sequential(g, d, [("h.h", b"def sq(x) = x * x;")]).finalize()

    table = {h.name: h for h in helpers}
    rows = [{"a": synth_value(5, 0, i), "b": synth_value(5, 1, i)} for i in range(50)]
    kept, s_vals, b_vals, n10 = 0, [], [], 0
    for r in rows:
        s = eval_expr(g.nodes[0].kind.expr, r, table)
        if r["a"] < 0.7:
            kept += 1
            s_vals.append(s)
            b_vals.append(r["b"])
        if r["b"] > 0.5 or r["a"] < 0.1:
            n10 += 1
    counts, under, over = histogram(s_vals, 7, 0.0, 1.5)
    assert got[1] == kept
    assert math.isclose(got[2], math.fsum(s_vals), rel_tol=1e-12)
    assert math.isclose(got[3], math.fsum(b_vals) / len(b_vals), rel_tol=1e-12)
    assert got[4]["counts"] == counts and (got[4]["underflow"], got[4]["overflow"]) == (under, over)
    assert got[10] == n10


def test_mean_of_nothing_is_nan():
    assert math.isnan(MeanAcc().final())
