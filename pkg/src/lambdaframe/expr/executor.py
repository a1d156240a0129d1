"""Single-pass graph execution over cluster-sized column blocks."""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from ..accumulators import CountAcc, HistoAcc, MeanAcc, PartialResult, SumAcc
from .evaluate import Evaluator
from .graph import ROOT, ComputationGraph, Count, Define, Filter, Histo1D, HelperFunction, Mean, Sum
from .typecheck import helper_table


class _Frame:
    """Column view at one graph node: raw cluster columns restricted to surviving rows."""

    __slots__ = ("raw", "idx", "values", "n")

    def __init__(self, raw: Mapping[str, np.ndarray], idx, values: dict, n: int):
        self.raw = raw
        self.idx = idx
        self.values = values
        self.n = n

    def get(self, name: str) -> np.ndarray:
        v = self.values.get(name)
        if v is None:
            v = self.raw[name]
            if self.idx is not None:
                v = v[self.idx]
            self.values[name] = v
        return v

    def define(self, name: str, value) -> "_Frame":
        value = np.broadcast_to(np.asarray(value, dtype=np.float64), (self.n,))
        return _Frame(self.raw, self.idx, {**self.values, name: value}, self.n)

    def select(self, mask) -> "_Frame":
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), (self.n,))
        idx = np.flatnonzero(mask) if self.idx is None else self.idx[mask]
        return _Frame(self.raw, idx, {k: v[mask] for k, v in self.values.items()}, int(idx.size))


class GraphExecutor:
    """Holds one accumulator per action and feeds it cluster blocks in order."""

    def __init__(
        self,
        graph: ComputationGraph,
        extra_helpers: Iterable[HelperFunction] = (),
        strict: bool = False,
    ):
        self.graph = graph
        self.evaluator = Evaluator(helper_table(list(extra_helpers) + list(graph.helpers)), strict)
        self.children = graph.children()
        self.accs = dict(PartialResult.identity(graph).actions)

    def process(self, columns: Mapping[str, np.ndarray], n: int) -> None:
        self._visit(ROOT, _Frame(columns, None, {}, n))

    def _visit(self, node_id: int, frame: _Frame) -> None:
        for child in self.children.get(node_id, ()):
            k = child.kind
            if isinstance(k, Define):
                self._visit(child.id, frame.define(k.name, self.evaluator.eval(k.expr, frame.get)))
            elif isinstance(k, Filter):
                sub = frame.select(self.evaluator.eval(k.expr, frame.get))
                if sub.n:
                    self._visit(child.id, sub)
            elif isinstance(k, Count):
                self.accs[child.id] = CountAcc(self.accs[child.id].n + frame.n)
            elif isinstance(k, Sum):
                acc = self.accs[child.id]
                self.accs[child.id] = SumAcc(acc.total + float(np.sum(frame.get(k.column))))
            elif isinstance(k, Mean):
                acc = self.accs[child.id]
                self.accs[child.id] = MeanAcc(acc.total + float(np.sum(frame.get(k.column))), acc.n + frame.n)
            elif isinstance(k, Histo1D):
                acc = self.accs[child.id]
                assert isinstance(acc, HistoAcc)
                self.accs[child.id] = acc.fill(frame.get(k.column))

    def result(self) -> PartialResult:
        return PartialResult(dict(self.accs))


def execute_graph(
    g: ComputationGraph,
    d,
    r,
    fetch: Callable[[int, int], Mapping[str, np.ndarray]],
    extra_helpers: Iterable[HelperFunction] = (),
) -> PartialResult:
    """Run ``g`` over range ``r`` of dataset ``d``, one cluster at a time in entry order.

    ``fetch(file_idx, cluster_idx)`` returns the cluster's columns.
    """
    ex = GraphExecutor(g, extra_helpers)
    for fi, ci in r.cluster_ids:
        c = d.files[fi].clusters[ci]
        ex.process(fetch(fi, ci), c.span)
    return ex.result()
