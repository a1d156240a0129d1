"""Mergeable per-action accumulators and the reduce step."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .expr.graph import ComputationGraph, Count, Histo1D, Mean, Sum


class ShapeMismatch(ValueError):
    def __init__(self, action_id: int, message: str = "accumulators differ in shape"):
        self.action_id = action_id
        super().__init__(f"action {action_id}: {message}")


@dataclass(frozen=True)
class CountAcc:
    n: int = 0

    def merge(self, other: "CountAcc") -> "CountAcc":
        return CountAcc(self.n + other.n)

    def final(self) -> int:
        return self.n


@dataclass(frozen=True)
class SumAcc:
    total: float = 0.0

    def merge(self, other: "SumAcc") -> "SumAcc":
        return SumAcc(self.total + other.total)

    def final(self) -> float:
        return self.total


@dataclass(frozen=True)
class MeanAcc:
    total: float = 0.0
    n: int = 0

    def merge(self, other: "MeanAcc") -> "MeanAcc":
        return MeanAcc(self.total + other.total, self.n + other.n)

    def final(self) -> float:
        return self.total / self.n if self.n else math.nan


@dataclass(frozen=True)
class HistoAcc:
    nbins: int
    lo: float
    hi: float
    counts: tuple[int, ...] = field(default=())
    underflow: int = 0
    overflow: int = 0

    def __post_init__(self):
        if not self.counts:
            object.__setattr__(self, "counts", (0,) * self.nbins)

    def merge(self, other: "HistoAcc") -> "HistoAcc":
        return replace(
            self,
            counts=tuple(a + b for a, b in zip(self.counts, other.counts)),
            underflow=self.underflow + other.underflow,
            overflow=self.overflow + other.overflow,
        )

    def final(self) -> dict:
        return {
            "nbins": self.nbins,
            "lo": self.lo,
            "hi": self.hi,
            "counts": list(self.counts),
            "underflow": self.underflow,
            "overflow": self.overflow,
        }

    def edges(self) -> np.ndarray:
        edges = self.lo + np.arange(self.nbins + 1) * ((self.hi - self.lo) / self.nbins)
        edges[-1] = self.hi
        return edges

    def fill(self, values: np.ndarray) -> "HistoAcc":
        """Bins are [lo + i*w, lo + (i+1)*w); values >= hi and NaN go to overflow."""
        values = np.asarray(values, dtype=np.float64)
        under = int(np.count_nonzero(values < self.lo))
        inside = values[(values >= self.lo) & (values < self.hi)]
        over = values.size - under - inside.size
        edges = self.edges()
        idx = np.searchsorted(edges, inside, side="right") - 1
        np.clip(idx, 0, self.nbins - 1, out=idx)
        binned = np.bincount(idx, minlength=self.nbins)
        return replace(
            self,
            counts=tuple(int(a + b) for a, b in zip(self.counts, binned)),
            underflow=self.underflow + under,
            overflow=self.overflow + over,
        )


Accumulator = Union[CountAcc, SumAcc, MeanAcc, HistoAcc]


def _shape(acc: Accumulator) -> tuple:
    if isinstance(acc, HistoAcc):
        return ("histo", acc.nbins, acc.lo, acc.hi)
    return (type(acc).__name__,)


@dataclass(frozen=True)
class PartialResult:
    """Accumulators keyed by action id."""

    actions: dict[int, Accumulator]

    @classmethod
    def identity(cls, g: ComputationGraph) -> "PartialResult":
        out: dict[int, Accumulator] = {}
        for node in g.actions:
            k = node.kind
            if isinstance(k, Count):
                out[node.id] = CountAcc()
            elif isinstance(k, Sum):
                out[node.id] = SumAcc()
            elif isinstance(k, Mean):
                out[node.id] = MeanAcc()
            elif isinstance(k, Histo1D):
                out[node.id] = HistoAcc(k.nbins, k.lo, k.hi)
        return cls(out)

    def finalize(self) -> dict[int, object]:
        return {aid: acc.final() for aid, acc in sorted(self.actions.items())}

    def to_json(self) -> dict:
        out = {}
        for aid, acc in sorted(self.actions.items()):
            if isinstance(acc, CountAcc):
                out[str(aid)] = {"type": "count", "n": acc.n}
            elif isinstance(acc, SumAcc):
                out[str(aid)] = {"type": "sum", "total": acc.total}
            elif isinstance(acc, MeanAcc):
                out[str(aid)] = {"type": "mean", "total": acc.total, "n": acc.n}
            else:
                out[str(aid)] = {"type": "histo1d", **acc.final()}
        return {"actions": out}

    @classmethod
    def from_json(cls, doc: dict) -> "PartialResult":
        out: dict[int, Accumulator] = {}
        for key, a in doc["actions"].items():
            t = a["type"]
            if t == "count":
                acc: Accumulator = CountAcc(int(a["n"]))
            elif t == "sum":
                acc = SumAcc(float(a["total"]))
            elif t == "mean":
                acc = MeanAcc(float(a["total"]), int(a["n"]))
            elif t == "histo1d":
                acc = HistoAcc(
                    int(a["nbins"]), float(a["lo"]), float(a["hi"]),
                    tuple(int(c) for c in a["counts"]), int(a["underflow"]), int(a["overflow"]),
                )
            else:
                raise ValueError(f"unknown accumulator type {t!r}")
            out[int(key)] = acc
        return cls(out)

    def encode(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def decode(cls, b: bytes) -> "PartialResult":
        return cls.from_json(json.loads(b))


def reduce(a: PartialResult, b: PartialResult) -> PartialResult:
    """Merge two partial results action by action. Commutative and associative."""
    if set(a.actions) != set(b.actions):
        missing = sorted(set(a.actions) ^ set(b.actions))
        raise ShapeMismatch(missing[0], "action present on one side only")
    out = {}
    for aid, x in a.actions.items():
        y = b.actions[aid]
        if _shape(x) != _shape(y):
            raise ShapeMismatch(aid)
        out[aid] = x.merge(y)  # type: ignore[arg-type]
    return PartialResult(out)
