"""Cluster-aligned range splitting: one EntryRange per serverless invocation."""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import DatasetDescriptor, EmptyDataset, EntryRange, validate


class InvalidPartitions(ValueError):
    def __init__(self, npartitions: int):
        self.npartitions = npartitions
        super().__init__(f"npartitions must be >= 1, got {npartitions}")


@dataclass(frozen=True)
class Plan:
    npartitions_requested: int
    npartitions_effective: int
    ranges: tuple[EntryRange, ...]

    def to_dict(self) -> dict:
        return {
            "npartitions_requested": self.npartitions_requested,
            "npartitions_effective": self.npartitions_effective,
            "ranges": [r.to_dict() for r in self.ranges],
        }


def build_plan(d: DatasetDescriptor, npartitions: int) -> Plan:
    """Split ``d`` into contiguous blocks of whole clusters.

    Blocks are balanced by cluster count: with C clusters and P = min(npartitions, C)
    partitions, partition i owns clusters [floor(i*C/P), floor((i+1)*C/P)).
    """
    if npartitions < 1:
        raise InvalidPartitions(npartitions)
    validate(d)
    clusters = list(d.global_clusters())
    n = len(clusters)
    if n == 0:
        raise EmptyDataset()
    p = min(npartitions, n)
    ranges = []
    for i in range(p):
        lo, hi = i * n // p, (i + 1) * n // p
        block = clusters[lo:hi]
        ranges.append(
            EntryRange(
                partition_id=i,
                begin=block[0][2],
                end=block[-1][3],
                cluster_ids=tuple((fi, ci) for fi, ci, *_ in block),
            )
        )
    return Plan(npartitions, p, tuple(ranges))
