"""Glue for whole experiments: build a backend, run a preset, sweep partition counts."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Sequence

from .driver import RunConfig, RunResult, run
from .monitor import speedup_table
from .platform import LocalPlatform, PlatformConfig, SimPlatform, admission_spread_s
from .platform.base import Backend
from .storage import DataSource, DataSourceConfig
from .workloads import DEFAULT_TOKEN, WorkloadPreset

SIM = "sim"
LOCAL = "local"
BACKENDS = (SIM, LOCAL)

SPEEDUP_CSV_HEADER = [
    "npartitions", "runtime_s", "speedup", "linear_speedup", "admission_spread_s", "model_runtime_s", "model_speedup",
]


def split_config(doc: Mapping) -> tuple[dict, dict]:
    """A config file holds ``platform`` and ``source`` tables; a flat file is all platform."""
    if "platform" in doc or "source" in doc:
        extra = set(doc) - {"platform", "source"}
        if extra:
            raise ValueError(f"unknown config sections: {sorted(extra)}")
        return dict(doc.get("platform", {})), dict(doc.get("source", {}))
    return dict(doc), {}


def platform_config_for(preset: WorkloadPreset, overrides: Mapping | None = None) -> PlatformConfig:
    """Preset cost model and sampling cadence, then anything the caller sets."""
    base = {"per_entry_cost_us": preset.per_entry_cost_us, "sampling_interval_s": preset.sampling_interval_s}
    return PlatformConfig.from_mapping({**base, **(overrides or {})})


def source_config_for(overrides: Mapping | None = None, seed: int = 0) -> DataSourceConfig:
    doc = {"valid_tokens": [DEFAULT_TOKEN], "seed": seed, **(overrides or {})}
    return DataSourceConfig.from_json(doc)


def make_backend(kind: str, pconf: PlatformConfig, sconf: DataSourceConfig) -> Backend:
    if kind == SIM:
        return SimPlatform(pconf, DataSource(sconf))
    if kind == LOCAL:
        return LocalPlatform(pconf, sconf)
    raise ValueError(f"unknown backend {kind!r}")


def run_preset(
    preset: WorkloadPreset,
    backend: Backend,
    npartitions: int,
    token: bytes | None = None,
    max_retries: int = 3,
    warmup: int = 0,
    run_id: str | None = None,
) -> RunResult:
    cfg = RunConfig(
        npartitions=npartitions,
        max_retries=max_retries,
        invoke_timeout_s=getattr(backend, "config", PlatformConfig()).timeout_s,
        warmup_count=warmup,
        run_id=run_id or f"{preset.name}-p{npartitions}",
    )
    return run(preset.graph, preset.dataset, cfg, backend, token=token, headers=preset.headers)


@dataclass
class SweepResult:
    runs: dict[int, RunResult]
    rows: list[tuple]

    def summary(self) -> dict:
        return {
            "npartitions": sorted(self.runs),
            "runs": {str(p): r.summary() for p, r in sorted(self.runs.items())},
            "speedup": [dict(zip(SPEEDUP_CSV_HEADER, row)) for row in self.rows],
        }


def runtime_us(r: RunResult) -> int:
    return round(r.wall_runtime_ms * 1000)


def sweep(
    preset: WorkloadPreset,
    partitions: Sequence[int],
    pconf: PlatformConfig,
    sconf: DataSourceConfig,
    backend: str = SIM,
    token: bytes | None = None,
    max_retries: int = 3,
    warmup: int | None = None,
) -> SweepResult:
    """One fresh backend per partition count. ``warmup=None`` pre-warms P containers for each P.

    Speedups are computed from integer-microsecond runtimes.
    """
    runs: dict[int, RunResult] = {}
    for p in sorted(set(partitions)):
        be = make_backend(backend, pconf, sconf)
        try:
            runs[p] = run_preset(preset, be, p, token, max_retries, p if warmup is None else warmup)
        finally:
            be.close()
    base = speedup_table({p: runtime_us(r) for p, r in runs.items()}, {p: preset.name for p in runs})
    rows = []
    for p, rt, speedup, linear in base:
        if pconf.throttled:
            spread = admission_spread_s(p, pconf.invocation_rate_limit, pconf.burst, pconf.refill_interval_s)
        else:
            spread = 0.0
        busy = [t.duration for t in runs[p].traces if t.status == "success"]
        model = spread + sum(busy) / len(busy) / 1000 if busy else spread
        rows.append((p, rt / 1e6, speedup, linear, spread, model, 0.0))
    ref = rows[0][5] if rows else 0.0
    rows = [r[:6] + (ref / r[5] if r[5] else 0.0,) for r in rows]
    return SweepResult(runs, rows)


def with_overrides(pconf: PlatformConfig, **kw) -> PlatformConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return dataclasses.replace(pconf, **kw) if kw else pconf
