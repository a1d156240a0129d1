"""Per-invocation traces, resource sampling, and run-level aggregation.

Times are milliseconds. ``ExecutionTrace.start_time``/``end_time`` are on the run's
global clock (virtual for the simulator, wall for local processes); sample times
and phase intervals are offsets from the trace's own start.

A sample at offset ``t`` describes the window since the previous sample (or since
the start, for the first one): ``cpu_frac`` is the mean busy fraction over that
window and ``net_rx_bytes`` the cumulative bytes received at ``t``.
"""

from __future__ import annotations

import bisect
import csv
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

FETCH = "fetch"
PROCESS = "process"

TRACE_CSV_HEADER = [
    "partition", "attempt", "start_ms", "end_ms", "cold", "killed",
    "t_ms", "cpu_frac", "mem_bytes", "net_rx_bytes",
]


@dataclass(frozen=True)
class Sample:
    t: float
    cpu_frac: float
    mem_bytes: int
    net_rx_bytes: int


@dataclass(frozen=True)
class Phase:
    kind: str  # FETCH or PROCESS
    begin: float
    end: float
    bytes: int = 0


@dataclass
class ExecutionTrace:
    partition_id: int
    attempt: int
    start_time: float
    end_time: float
    cold: bool = False
    killed: bool = False
    samples: list[Sample] = field(default_factory=list)
    phases: list[Phase] = field(default_factory=list)
    status: str = "success"
    requested_time: float | None = None
    admitted_time: float | None = None

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    def busy_time(self) -> float:
        """CPU-seconds (in ms) represented by the samples."""
        prev, total = 0.0, 0.0
        for s in self.samples:
            total += s.cpu_frac * (s.t - prev)
            prev = s.t
        return total

    def to_json(self) -> dict:
        return {
            "partition_id": self.partition_id,
            "attempt": self.attempt,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "cold": self.cold,
            "killed": self.killed,
            "status": self.status,
            "requested_time": self.requested_time,
            "admitted_time": self.admitted_time,
            "samples": [[s.t, s.cpu_frac, s.mem_bytes, s.net_rx_bytes] for s in self.samples],
            "phases": [[p.kind, p.begin, p.end, p.bytes] for p in self.phases],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ExecutionTrace":
        return cls(
            partition_id=int(doc["partition_id"]),
            attempt=int(doc["attempt"]),
            start_time=float(doc["start_time"]),
            end_time=float(doc["end_time"]),
            cold=bool(doc.get("cold", False)),
            killed=bool(doc.get("killed", False)),
            status=doc.get("status", "success"),
            requested_time=doc.get("requested_time"),
            admitted_time=doc.get("admitted_time"),
            samples=[Sample(float(t), float(c), int(m), int(n)) for t, c, m, n in doc.get("samples", ())],
            phases=[Phase(k, float(b), float(e), int(nb)) for k, b, e, nb in doc.get("phases", ())],
        )


def synthesize_samples(
    phases: Sequence[Phase],
    duration: float,
    interval: float,
    fetch_cpu: float = 0.02,
    process_cpu: float = 1.0,
    mem_bytes: int = 0,
) -> list[Sample]:
    """Window-averaged samples for a trace made only of non-overlapping fetch/process phases."""
    if duration <= 0:
        return []
    ticks = [interval * k for k in range(1, int(duration // interval) + 1)]
    if not ticks or ticks[-1] < duration:
        ticks.append(duration)
    phases = sorted(phases, key=lambda p: p.begin)
    begins = [p.begin for p in phases]
    # cumulative busy time and bytes at the end of each phase
    busy_done, net_done = [0.0], [0]
    for p in phases:
        w = process_cpu if p.kind == PROCESS else fetch_cpu
        busy_done.append(busy_done[-1] + w * (p.end - p.begin))
        net_done.append(net_done[-1] + (p.bytes if p.kind == FETCH else 0))

    def at(t: float) -> tuple[float, int]:
        i = bisect.bisect_right(begins, t)  # phases[:i] began at or before t
        if i == 0:
            return 0.0, 0
        p = phases[i - 1]
        if t >= p.end:
            return busy_done[i], net_done[i]
        w = process_cpu if p.kind == PROCESS else fetch_cpu
        net = net_done[i - 1]
        if p.kind == FETCH and p.bytes:
            net += int(p.bytes * (t - p.begin) / (p.end - p.begin))
        return busy_done[i - 1] + w * (t - p.begin), net

    out = []
    prev, prev_busy = 0.0, 0.0
    for t in ticks:
        busy, net = at(t)
        out.append(Sample(t, (busy - prev_busy) / (t - prev), mem_bytes, net))
        prev, prev_busy = t, busy
    return out


class WallMonitor:
    """Background sampler of the current process (CPU, RSS, host network receive counter)."""

    def __init__(self, interval_s: float = 1.0):
        if interval_s <= 0:
            raise ValueError("sampling interval must be positive")
        self.interval_s = interval_s
        self.samples: list[Sample] = []
        self.phases: list[Phase] = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._t0 = 0.0

    def now(self) -> float:
        return (time.perf_counter() - self._t0) * 1000.0

    def start(self) -> None:
        import psutil

        self._proc = psutil.Process()
        self._proc.cpu_percent(None)
        self._net0 = _net_rx()
        self._t0 = time.perf_counter()
        self._thread = threading.Thread(target=self._run, name="monitor", daemon=True)
        self._thread.start()

    def _take(self) -> None:
        t = self.now()
        if self.samples and t <= self.samples[-1].t:
            return
        cpu = min(1.0, self._proc.cpu_percent(None) / 100.0)
        net = max(0, _net_rx() - self._net0)
        if self.samples:
            net = max(net, self.samples[-1].net_rx_bytes)
        self.samples.append(Sample(t, cpu, self._proc.memory_info().rss, net))

    def _run(self) -> None:
        while not self._stop.wait(self.interval_s):
            self._take()

    def stop(self) -> list[Sample]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        self._take()
        return list(self.samples)


def _net_rx() -> int:
    import psutil

    counters = psutil.net_io_counters()
    return int(counters.bytes_recv) if counters else 0


def aggregate_cpu(traces: Sequence[ExecutionTrace], bucket: float) -> list[tuple[float, float]]:
    """Sum of cpu_frac over live executions per time bucket, t=0 at the earliest start.

    Each sample's window is spread over the buckets it overlaps, so the integral
    of the series equals the summed busy time of all traces.
    """
    if not traces:
        return []
    t0 = min(tr.start_time for tr in traces)
    t_end = max(tr.end_time for tr in traces)
    nb = max(1, math.ceil((t_end - t0) / bucket - 1e-9))
    totals = [0.0] * nb
    for tr in traces:
        prev = 0.0
        for s in tr.samples:
            a = tr.start_time - t0 + prev
            b = tr.start_time - t0 + s.t
            prev = s.t
            if b <= a or s.cpu_frac == 0:
                continue
            k = max(0, int(a // bucket))
            while k < nb and k * bucket < b:
                ov = min(b, (k + 1) * bucket) - max(a, k * bucket)
                if ov > 0:
                    totals[k] += s.cpu_frac * ov
                k += 1
    return [(k * bucket, totals[k] / bucket) for k in range(nb)]


def steady_interval(traces: Sequence[ExecutionTrace]) -> tuple[float, float]:
    """[latest start, earliest end] relative to the earliest start: every execution is live."""
    t0 = min(tr.start_time for tr in traces)
    return max(tr.start_time for tr in traces) - t0, min(tr.end_time for tr in traces) - t0


def steady_utilization(traces: Sequence[ExecutionTrace], bucket: float) -> list[float]:
    """Per-bucket CPU as a fraction of ``len(traces)`` vCPUs, for buckets inside the steady interval."""
    lo, hi = steady_interval(traces)
    n = len(traces)
    return [v / n for t, v in aggregate_cpu(traces, bucket) if t >= lo and t + bucket <= hi]


def spread_stats(traces: Sequence[ExecutionTrace]) -> dict[str, float]:
    if not traces:
        raise ValueError("need at least one trace")
    starts = [t.start_time for t in traces]
    ends = [t.end_time for t in traces]
    return {
        "start_spread": max(starts) - min(starts),
        "end_spread": max(ends) - min(ends),
        "runtime": max(ends) - min(starts),
    }


class MismatchedWorkload(ValueError):
    pass


def speedup_table(
    runtimes: Mapping[int, float],
    workloads: Mapping[int, str] | None = None,
) -> list[tuple[int, float, float, float]]:
    """Rows ``(P, runtime, speedup, linear)`` with speedup relative to the smallest P."""
    if workloads and len(set(workloads.values())) > 1:
        raise MismatchedWorkload(f"runs come from different workloads: {sorted(set(workloads.values()))}")
    if not runtimes:
        return []
    p_min = min(runtimes)
    ref = runtimes[p_min]
    return [(p, runtimes[p], ref / runtimes[p], p / p_min) for p in sorted(runtimes)]


def check_alternation(trace: ExecutionTrace, fetch_cpu_ceiling: float = 0.05) -> list[str]:
    """Violations of the fetch/process alternation; empty when the trace is clean."""
    problems = []
    phases = sorted(trace.phases, key=lambda p: p.begin)
    for a, b in zip(phases, phases[1:]):
        if b.begin < a.end:
            problems.append(f"phases overlap at {b.begin}")
        if a.kind == b.kind:
            problems.append(f"two consecutive {a.kind} phases at {b.begin}")
    prev_t, prev_net = 0.0, 0
    for s in trace.samples:
        for p in phases:
            if p.begin <= prev_t and s.t <= p.end:
                if p.kind == FETCH and s.cpu_frac > fetch_cpu_ceiling:
                    problems.append(f"cpu {s.cpu_frac:.3f} inside fetch phase at t={s.t}")
                if p.kind == PROCESS and s.net_rx_bytes != prev_net:
                    problems.append(f"network traffic inside process phase at t={s.t}")
        prev_t, prev_net = s.t, s.net_rx_bytes
    return problems


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def write_traces_csv(traces: Iterable[ExecutionTrace], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_CSV_HEADER)
        for tr in traces:
            head = [tr.partition_id, tr.attempt, _fmt(tr.start_time), _fmt(tr.end_time), int(tr.cold), int(tr.killed)]
            if not tr.samples:
                w.writerow(head + ["", "", "", ""])
            for s in tr.samples:
                w.writerow(head + [_fmt(s.t), f"{s.cpu_frac:.6f}", s.mem_bytes, s.net_rx_bytes])


def read_traces_csv(path: str | Path) -> list[ExecutionTrace]:
    traces: dict[tuple[int, int], ExecutionTrace] = {}
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != TRACE_CSV_HEADER:
            raise ValueError(f"unexpected trace header {r.fieldnames}")
        for row in r:
            key = (int(row["partition"]), int(row["attempt"]))
            tr = traces.get(key)
            if tr is None:
                tr = traces[key] = ExecutionTrace(
                    key[0], key[1], float(row["start_ms"]), float(row["end_ms"]),
                    cold=row["cold"] == "1", killed=row["killed"] == "1",
                )
            if row["t_ms"]:
                tr.samples.append(
                    Sample(float(row["t_ms"]), float(row["cpu_frac"]), int(row["mem_bytes"]), int(row["net_rx_bytes"]))
                )
    return list(traces.values())
