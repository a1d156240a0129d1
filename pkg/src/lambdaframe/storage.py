"""Token-gated remote data source and the write-once object store for partial results."""

from __future__ import annotations

import os
import tempfile
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _rng
from .dataset import SYNTHETIC, DatasetDescriptor, synth_block

MiB = 1 << 20


class FetchError(IOError):
    pass


class AuthError(FetchError):
    pass


class InjectedIOError(FetchError):
    pass


class StoreError(IOError):
    pass


class KeyExists(StoreError):
    pass


class KeyNotFound(StoreError, KeyError):
    pass


@dataclass(frozen=True)
class FetchStats:
    duration_us: int
    bytes: int
    remote: bool


class ClusterData(Mapping[str, np.ndarray]):
    """Columns of one cluster, generated on first access."""

    def __init__(self, dataset: DatasetDescriptor, begin: int, end: int):
        self.dataset = dataset
        self.begin = begin
        self.end = end
        self._cache: dict[str, np.ndarray] = {}

    def __getitem__(self, name: str) -> np.ndarray:
        arr = self._cache.get(name)
        if arr is None:
            try:
                col = self.dataset.columns.index(name)
            except ValueError:
                raise KeyError(name) from None
            arr = synth_block(self.dataset.seed, col, self.begin, self.end)
            self._cache[name] = arr
        return arr

    def __iter__(self):
        return iter(self.dataset.columns)

    def __len__(self) -> int:
        return len(self.dataset.columns)


@dataclass
class DataSourceConfig:
    latency_s: float = 0.050
    bandwidth: float = 100 * MiB  # bytes per second
    valid_tokens: frozenset[str] = frozenset()
    per_request_jitter_frac: float = 0.0
    io_error_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.latency_s < 0:
            raise ValueError("latency must be non-negative")
        if not 0.0 <= self.io_error_probability <= 1.0:
            raise ValueError("io_error_probability must be in [0, 1]")
        self.valid_tokens = frozenset(self.valid_tokens)

    def to_json(self) -> dict:
        return {
            "latency_s": self.latency_s,
            "bandwidth": self.bandwidth,
            "valid_tokens": sorted(self.valid_tokens),
            "per_request_jitter_frac": self.per_request_jitter_frac,
            "io_error_probability": self.io_error_probability,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "DataSourceConfig":
        return cls(**{**doc, "valid_tokens": frozenset(doc.get("valid_tokens", ()))})


class DataSource:
    """Remote cluster reads with a cost model, token checks and an exactly-once read ledger.

    Values are regenerated from the dataset seed; the cost model uses each
    cluster's declared byte size.
    """

    def __init__(self, config: DataSourceConfig | None = None):
        self.config = config or DataSourceConfig()
        self.ledger: Counter[tuple[str, int]] = Counter()
        self._requests: Counter[tuple[str, int]] = Counter()
        self._lock = threading.Lock()

    def fetch_cluster(
        self,
        dataset: DatasetDescriptor,
        file_idx: int,
        cluster_idx: int,
        token: bytes | None = None,
    ) -> tuple[ClusterData, FetchStats]:
        f = dataset.files[file_idx]
        c = f.clusters[cluster_idx]
        key = (f.uri, cluster_idx)
        with self._lock:
            self._requests[key] += 1
            request_no = self._requests[key]
        if f.requires_token and not self.authorized(token):
            raise AuthError(f"{f.uri}: missing or invalid token")
        cfg = self.config
        if cfg.io_error_probability and _rng.unit(cfg.seed, "io", key, request_no) < cfg.io_error_probability:
            raise InjectedIOError(f"{f.uri} cluster {cluster_idx}: injected read failure")
        begin = dataset.file_offsets()[file_idx] + c.first_entry
        data = ClusterData(dataset, begin, begin + c.span)
        if dataset.kind == SYNTHETIC:
            stats = FetchStats(0, 0, remote=False)
        else:
            seconds = cfg.latency_s + c.byte_size / cfg.bandwidth
            if cfg.per_request_jitter_frac:
                seconds *= 1.0 + cfg.per_request_jitter_frac * _rng.symmetric(cfg.seed, "jit", key, request_no)
            stats = FetchStats(max(0, round(seconds * 1e6)), c.byte_size, remote=True)
        with self._lock:
            self.ledger[key] += 1
        return data, stats

    def authorized(self, token: bytes | None) -> bool:
        if token is None:
            return False
        return token.decode(errors="replace").strip() in self.config.valid_tokens

    def reset_ledger(self) -> None:
        with self._lock:
            self.ledger.clear()


class ObjectStore:
    """Write-once key/value store interface."""

    def put(self, key: str, data: bytes) -> None:
        raise NotImplementedError

    def get(self, key: str) -> bytes:
        raise NotImplementedError

    def exists(self, key: str) -> bool:
        raise NotImplementedError

    def keys(self, prefix: str = "") -> list[str]:
        raise NotImplementedError


class MemoryObjectStore(ObjectStore):
    def __init__(self):
        self._data: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, key: str, data: bytes) -> None:
        with self._lock:
            if key in self._data:
                raise KeyExists(key)
            self._data[key] = bytes(data)

    def get(self, key: str) -> bytes:
        with self._lock:
            try:
                return self._data[key]
            except KeyError:
                raise KeyNotFound(key) from None

    def exists(self, key: str) -> bool:
        with self._lock:
            return key in self._data

    def keys(self, prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(k for k in self._data if k.startswith(prefix))


class DirObjectStore(ObjectStore):
    """Keys map to files under ``root``; writes land via temp file + hard link."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        parts = key.split("/")
        if not key or any(p in ("", ".", "..") for p in parts):
            raise StoreError(f"invalid key {key!r}")
        return self.root.joinpath(*parts)

    def put(self, key: str, data: bytes) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            try:
                os.link(tmp, path)
            except FileExistsError:
                raise KeyExists(key) from None
        finally:
            os.unlink(tmp)

    def get(self, key: str) -> bytes:
        try:
            return self._path(key).read_bytes()
        except FileNotFoundError:
            raise KeyNotFound(key) from None

    def exists(self, key: str) -> bool:
        return self._path(key).is_file()

    def keys(self, prefix: str = "") -> list[str]:
        out = []
        for p in self.root.rglob("*"):
            if p.is_file() and not p.name.startswith(".tmp-"):
                k = p.relative_to(self.root).as_posix()
                if k.startswith(prefix):
                    out.append(k)
        return sorted(out)


class StagedStore(ObjectStore):
    """Buffers puts until ``commit``; used when an attempt may be killed before its write lands."""

    def __init__(self, backing: ObjectStore):
        self.backing = backing
        self.pending: dict[str, bytes] = {}

    def put(self, key: str, data: bytes) -> None:
        if key in self.pending or self.backing.exists(key):
            raise KeyExists(key)
        self.pending[key] = bytes(data)

    def get(self, key: str) -> bytes:
        if key in self.pending:
            return self.pending[key]
        return self.backing.get(key)

    def exists(self, key: str) -> bool:
        return key in self.pending or self.backing.exists(key)

    def keys(self, prefix: str = "") -> list[str]:
        return sorted(set(self.backing.keys(prefix)) | {k for k in self.pending if k.startswith(prefix)})

    def commit(self) -> None:
        for k, v in self.pending.items():
            self.backing.put(k, v)
        self.pending.clear()

    def discard(self) -> None:
        self.pending.clear()


def result_key(run_id: str, partition_id: int, attempt: int) -> str:
    return f"results/{run_id}/{partition_id}-{attempt}"

