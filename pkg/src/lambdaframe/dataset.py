"""Columnar dataset descriptors and the deterministic synthetic data source.

A dataset is an ordered list of files, each an ordered list of clusters.
Global entry numbering is the concatenation of all files in order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

MANIFEST_VERSION = 1

SYNTHETIC = "synthetic"
SIMULATED_REMOTE = "simulated_remote"
KINDS = (SYNTHETIC, SIMULATED_REMOTE)


class ValidationError(ValueError):
    pass


class EmptyDataset(ValidationError):
    def __init__(self, message: str = "dataset has no entries"):
        super().__init__(message)


class NonContiguousClusters(ValidationError):
    def __init__(self, file: int, index: int, message: str = ""):
        self.file = file
        self.index = index
        super().__init__(message or f"non-contiguous clusters in file {file} at cluster {index}")


class DuplicateColumn(ValidationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate column {name!r}")


@dataclass(frozen=True)
class ClusterInfo:
    first_entry: int
    last_entry: int
    byte_size: int

    @property
    def span(self) -> int:
        return self.last_entry - self.first_entry


@dataclass(frozen=True)
class FileDescriptor:
    uri: str
    clusters: tuple[ClusterInfo, ...]
    requires_token: bool = False

    @property
    def entries(self) -> int:
        return sum(c.span for c in self.clusters)


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    files: tuple[FileDescriptor, ...]
    columns: tuple[str, ...]
    seed: int = 0
    kind: str = SYNTHETIC

    def cluster_refs(self) -> list[tuple[int, int]]:
        return [(fi, ci) for fi, f in enumerate(self.files) for ci in range(len(f.clusters))]

    def global_clusters(self) -> Iterator[tuple[int, int, int, int, ClusterInfo]]:
        """Yield ``(file_idx, cluster_idx, global_begin, global_end, info)`` in entry order."""
        offset = 0
        for fi, f in enumerate(self.files):
            base = offset
            for ci, c in enumerate(f.clusters):
                yield fi, ci, base + c.first_entry, base + c.last_entry, c
            offset += f.entries

    def file_offsets(self) -> tuple[int, ...]:
        return self._offsets

    @cached_property
    def _offsets(self) -> tuple[int, ...]:
        offsets, acc = [], 0
        for f in self.files:
            offsets.append(acc)
            acc += f.entries
        return tuple(offsets)

    @property
    def requires_token(self) -> bool:
        return any(f.requires_token for f in self.files)

    def to_manifest(self) -> dict:
        return {
            "manifest_version": MANIFEST_VERSION,
            "name": self.name,
            "kind": self.kind,
            "seed": self.seed,
            "columns": list(self.columns),
            "files": [
                {
                    "uri": f.uri,
                    "requires_token": f.requires_token,
                    "clusters": [
                        {"first": c.first_entry, "last": c.last_entry, "bytes": c.byte_size}
                        for c in f.clusters
                    ],
                }
                for f in self.files
            ],
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "DatasetDescriptor":
        version = doc.get("manifest_version")
        if version != MANIFEST_VERSION:
            raise ValidationError(f"unsupported manifest_version {version!r}")
        kind = doc.get("kind", SYNTHETIC)
        if kind not in KINDS:
            raise ValidationError(f"unknown dataset kind {kind!r}")
        files = tuple(
            FileDescriptor(
                uri=f["uri"],
                requires_token=bool(f.get("requires_token", False)),
                clusters=tuple(
                    ClusterInfo(int(c["first"]), int(c["last"]), int(c["bytes"]))
                    for c in f["clusters"]
                ),
            )
            for f in doc["files"]
        )
        return cls(
            name=doc["name"],
            files=files,
            columns=tuple(doc["columns"]),
            seed=int(doc.get("seed", 0)),
            kind=kind,
        )


@dataclass(frozen=True)
class EntryRange:
    partition_id: int
    begin: int
    end: int
    cluster_ids: tuple[tuple[int, int], ...] = field(default=())

    @property
    def entries(self) -> int:
        return self.end - self.begin

    def to_dict(self) -> dict:
        return {
            "partition_id": self.partition_id,
            "begin": self.begin,
            "end": self.end,
            "clusters": [list(c) for c in self.cluster_ids],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EntryRange":
        return cls(
            partition_id=int(doc["partition_id"]),
            begin=int(doc["begin"]),
            end=int(doc["end"]),
            cluster_ids=tuple((int(f), int(c)) for f, c in doc["clusters"]),
        )


def total_entries(d: DatasetDescriptor) -> int:
    return sum(c.span for f in d.files for c in f.clusters)


def validate(d: DatasetDescriptor) -> None:
    """Raise the first violated invariant; return None when the descriptor is well formed."""
    if not d.files or not any(f.clusters for f in d.files):
        raise EmptyDataset()
    seen = set()
    for name in d.columns:
        if name in seen:
            raise DuplicateColumn(name)
        seen.add(name)
    if d.kind not in KINDS:
        raise ValidationError(f"unknown dataset kind {d.kind!r}")
    for fi, f in enumerate(d.files):
        for ci, c in enumerate(f.clusters):
            if c.first_entry >= c.last_entry:
                raise ValidationError(f"empty or inverted cluster {ci} in file {fi}")
            if c.byte_size <= 0:
                raise ValidationError(f"non-positive byte size for cluster {ci} in file {fi}")
            expected = 0 if ci == 0 else f.clusters[ci - 1].last_entry
            if c.first_entry != expected:
                raise NonContiguousClusters(fi, ci)
    if total_entries(d) <= 0:
        raise EmptyDataset()


def load_manifest(path: str | Path) -> DatasetDescriptor:
    d = DatasetDescriptor.from_manifest(json.loads(Path(path).read_text()))
    validate(d)
    return d


def dump_manifest(d: DatasetDescriptor, path: str | Path) -> None:
    Path(path).write_text(json.dumps(d.to_manifest(), indent=2, sort_keys=True) + "\n")


def uniform_layout(
    name: str,
    files: int,
    clusters_per_file: int,
    entries_per_cluster: int,
    bytes_per_cluster: int,
    columns: Sequence[str],
    seed: int = 0,
    kind: str = SYNTHETIC,
    requires_token: bool = False,
    uri_prefix: str = "mem://",
) -> DatasetDescriptor:
    fds = []
    for fi in range(files):
        clusters = tuple(
            ClusterInfo(ci * entries_per_cluster, (ci + 1) * entries_per_cluster, bytes_per_cluster)
            for ci in range(clusters_per_file)
        )
        fds.append(FileDescriptor(f"{uri_prefix}{name}/file{fi:04d}.root", clusters, requires_token))
    return DatasetDescriptor(name, tuple(fds), tuple(columns), seed, kind)


def layout_from_spans(
    name: str,
    spans_per_file: Sequence[Sequence[int]],
    columns: Sequence[str] = ("c0",),
    seed: int = 0,
    bytes_per_entry: int = 8,
) -> DatasetDescriptor:
    fds = []
    for fi, spans in enumerate(spans_per_file):
        clusters, first = [], 0
        for span in spans:
            clusters.append(ClusterInfo(first, first + span, max(1, span * bytes_per_entry)))
            first += span
        fds.append(FileDescriptor(f"mem://{name}/file{fi:04d}", tuple(clusters)))
    return DatasetDescriptor(name, tuple(fds), tuple(columns), seed)


# Counter-based generator: splitmix64 finalizer over a per-(seed, column) stream.
_GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _stream_key(seed: int, column_index: int) -> int:
    return _mix64((_mix64((seed + _GAMMA) & _MASK) + (column_index + 1) * _GAMMA) & _MASK)


def synth_value(seed: int, column_index: int, global_entry: int) -> float:
    return float(synth_block(seed, column_index, global_entry, global_entry + 1)[0])


def synth_block(seed: int, column_index: int, begin: int, end: int) -> np.ndarray:
    """Values for global entries ``[begin, end)``; each a pure function of (seed, column, entry)."""
    key = np.uint64(_stream_key(seed, column_index))
    n = np.arange(begin, end, dtype=np.uint64) + np.uint64(1)
    z = n * np.uint64(_GAMMA) + key
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
