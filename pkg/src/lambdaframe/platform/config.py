from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class FailureSpec:
    """Per-attempt injected failures, drawn deterministically from the platform seed."""

    probability: float = 0.0
    kinds: tuple[str, ...] = ("Crash",)
    # partition id -> probability, overriding ``probability`` for that partition
    partitions: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.kinds = tuple(self.kinds)
        self.partitions = {int(k): float(v) for k, v in self.partitions.items()}
        for p in [self.probability, *self.partitions.values()]:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"failure probability {p} outside [0, 1]")
        if not self.kinds:
            raise ValueError("failure kinds must not be empty")

    def probability_for(self, partition_id: int) -> float:
        return self.partitions.get(partition_id, self.probability)


@dataclass
class PlatformConfig:
    invocation_rate_limit: float | None = 10.0  # new invocations per second; None disables
    burst: int = 10
    refill_interval_s: float = 1.0
    concurrency_limit: int = 1000
    cold_start_s: float = 5.0
    warm_start_s: float = 0.2
    warm_retention_s: float = 1800.0
    timeout_s: float = 900.0
    start_jitter_max_s: float = 0.0
    service_jitter_frac: float = 0.0
    seed: int = 0
    failure: FailureSpec = field(default_factory=FailureSpec)
    # simulator cost model and trace synthesis
    per_entry_cost_us: float = 1.0
    sampling_interval_s: float = 1.0
    fetch_cpu_frac: float = 0.02
    process_cpu_frac: float = 1.0
    memory_bytes: int = 256 << 20
    monitor_overhead_frac: float = 0.0

    def __post_init__(self):
        if isinstance(self.failure, Mapping):
            self.failure = FailureSpec(**self.failure)
        durations = (
            self.refill_interval_s, self.cold_start_s, self.warm_start_s, self.warm_retention_s,
            self.timeout_s, self.start_jitter_max_s, self.per_entry_cost_us,
        )
        if any(d < 0 for d in durations):
            raise ValueError("durations must be non-negative")
        if self.sampling_interval_s <= 0 or self.refill_interval_s <= 0:
            raise ValueError("intervals must be positive")
        if self.invocation_rate_limit is not None and self.invocation_rate_limit < 0:
            raise ValueError("invocation_rate_limit must be non-negative")
        if self.burst < 1 or self.concurrency_limit < 1:
            raise ValueError("burst and concurrency_limit must be >= 1")
        if not 0.0 <= self.service_jitter_frac < 1.0:
            raise ValueError("service_jitter_frac must be in [0, 1)")
        if self.monitor_overhead_frac < 0:
            raise ValueError("monitor_overhead_frac must be non-negative")

    @property
    def throttled(self) -> bool:
        return bool(self.invocation_rate_limit)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["failure"]["kinds"] = list(self.failure.kinds)
        doc["failure"]["partitions"] = {str(k): v for k, v in self.failure.partitions.items()}
        return doc

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "PlatformConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown platform config keys: {sorted(unknown)}")
        return cls(**dict(doc))


def load_config(path: str | Path) -> dict:
    """Read a JSON or TOML config file into a plain dict."""
    path = Path(path)
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(path.read_text())
