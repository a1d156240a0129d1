"""CSV products derived from a traces file, one per kind of figure.

    single_trace.csv        CPU and network over time for one execution
    aggregate_cpu.csv       summed CPU of all executions per time bucket
    relative_times.csv      each execution's start and end relative to the first start and first end
    timeline.csv            start/end on the run clock and per-execution duration
    per_execution_usage.csv average CPU and network per execution
    spread.json             start spread, end spread and run wall runtime

The runtime-scaling table (speedup.csv) comes from ``sweep`` instead, since it
needs several runs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .monitor import ExecutionTrace, aggregate_cpu, read_traces_csv, spread_stats

PRODUCTS = (
    "single_trace.csv", "aggregate_cpu.csv", "relative_times.csv",
    "timeline.csv", "per_execution_usage.csv", "spread.json",
)


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _f(x: float, digits: int = 3) -> str:
    return f"{x:.{digits}f}"


def write_single_trace(tr: ExecutionTrace, path: Path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["partition", "attempt", "t_ms", "cpu_frac", "net_rx_bytes", "net_rx_rate_bytes_per_s"])
        prev_t, prev_net = 0.0, 0
        for s in tr.samples:
            dt = s.t - prev_t
            rate = (s.net_rx_bytes - prev_net) / dt * 1000 if dt > 0 else 0.0
            w.writerow([tr.partition_id, tr.attempt, _f(s.t), _f(s.cpu_frac, 6), s.net_rx_bytes, _f(rate)])
            prev_t, prev_net = s.t, s.net_rx_bytes


def write_aggregate_cpu(traces: Sequence[ExecutionTrace], bucket_ms: float, path: Path) -> None:
    n = len(traces)
    fh, w = _writer(path)
    with fh:
        w.writerow(["t_ms", "total_cpu", "fraction_of_vcpus"])
        for t, v in aggregate_cpu(traces, bucket_ms):
            w.writerow([_f(t), _f(v, 6), _f(v / n, 6)])


def write_relative_times(traces: Sequence[ExecutionTrace], path: Path) -> None:
    first_start = min(t.start_time for t in traces)
    first_end = min(t.end_time for t in traces)
    fh, w = _writer(path)
    with fh:
        w.writerow(["partition", "attempt", "start_offset_ms", "end_offset_ms"])
        for t in traces:
            w.writerow([t.partition_id, t.attempt, _f(t.start_time - first_start), _f(t.end_time - first_end)])


def write_timeline(traces: Sequence[ExecutionTrace], path: Path) -> None:
    t0 = min(t.start_time for t in traces)
    fh, w = _writer(path)
    with fh:
        w.writerow(["partition", "attempt", "start_ms", "end_ms", "duration_ms", "cold", "killed"])
        for t in traces:
            w.writerow([
                t.partition_id, t.attempt, _f(t.start_time - t0), _f(t.end_time - t0),
                _f(t.duration), int(t.cold), int(t.killed),
            ])


def write_usage(traces: Sequence[ExecutionTrace], path: Path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["partition", "attempt", "duration_ms", "avg_cpu_frac", "rx_bytes", "avg_rx_rate_bytes_per_s"])
        for t in traces:
            span = t.samples[-1].t if t.samples else 0.0
            cpu = t.busy_time() / span if span > 0 else 0.0
            rx = t.samples[-1].net_rx_bytes if t.samples else 0
            rate = rx / span * 1000 if span > 0 else 0.0
            w.writerow([t.partition_id, t.attempt, _f(t.duration), _f(cpu, 6), rx, _f(rate)])


def write_report(
    traces: Sequence[ExecutionTrace],
    out: str | Path,
    bucket_ms: float = 1000.0,
    partition: int | None = None,
) -> list[Path]:
    """Write every product into ``out``. The single-trace product uses ``partition``
    (its last attempt), or the first trace when not given."""
    if not traces:
        raise ValueError("no traces to report on")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    traces = sorted(traces, key=lambda t: (t.partition_id, t.attempt))
    if partition is None:
        one = traces[0]
    else:
        picked = [t for t in traces if t.partition_id == partition]
        if not picked:
            raise ValueError(f"no trace for partition {partition}")
        one = picked[-1]
    write_single_trace(one, out / "single_trace.csv")
    write_aggregate_cpu(traces, bucket_ms, out / "aggregate_cpu.csv")
    write_relative_times(traces, out / "relative_times.csv")
    write_timeline(traces, out / "timeline.csv")
    write_usage(traces, out / "per_execution_usage.csv")
    stats = {k: round(v, 3) for k, v in spread_stats(traces).items()}
    (out / "spread.json").write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n")
    return [out / p for p in PRODUCTS]


def report_from_file(traces_csv: str | Path, out: str | Path, bucket_ms: float = 1000.0, partition=None) -> list[Path]:
    return write_report(read_traces_csv(traces_csv), out, bucket_ms, partition)
