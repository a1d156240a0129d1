"""Deterministic discrete-event model of a synchronous-invocation FaaS platform.

Lifecycle of one invocation on the virtual clock (integer microseconds):

    request -> admission (token bucket) -> container (warm reuse, cold start,
    or wait for the concurrency limit) -> startup delay + start jitter ->
    worker body (timed by the cost model, scaled by service jitter) -> release

The worker body really runs, in-process, so results are real; only time is modeled.
"""

from __future__ import annotations

import heapq
import itertools
import shutil
import tempfile
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .. import _rng
from ..monitor import ExecutionTrace, Phase, synthesize_samples
from ..payload import FAILURE, DecodeError, WorkerResponse, decode
from ..storage import DataSource, DataSourceConfig, MemoryObjectStore, ObjectStore, StagedStore
from ..worker import WorkerEnv, run_worker
from .base import INJECTED, TIMEOUT, Backend, Invocation
from .config import PlatformConfig
from .throttle import TokenBucket

US = 1_000_000


def _us(seconds: float) -> int:
    return round(seconds * US)


@dataclass
class Container:
    container_id: int
    workdir: Path
    last_release_us: int = 0
    busy: bool = False

    def warm(self, now_us: int, retention_us: int) -> bool:
        return not self.busy and now_us - self.last_release_us < retention_us


@dataclass
class _Pending:
    payload: bytes
    callback: Callable[[WorkerResponse], None]
    requested_us: int
    deadline_s: float | None
    admitted_us: int = 0
    partition_id: int = -1
    attempt: int = 0


@dataclass(order=True)
class _Event:
    time_us: int
    seq: int
    action: Callable[[], None] = field(compare=False)


class SimPlatform(Backend):
    name = "sim"

    def __init__(
        self,
        config: PlatformConfig | None = None,
        source: DataSource | None = None,
        store: ObjectStore | None = None,
        workdir: str | Path | None = None,
    ):
        self.config = config or PlatformConfig()
        self.source = source or DataSource(DataSourceConfig(seed=self.config.seed))
        self.store = store or MemoryObjectStore()
        self._own_workdir = workdir is None
        self.workdir = Path(workdir) if workdir is not None else Path(tempfile.mkdtemp(prefix="lambdaframe-sim-"))
        self.now_us = 0
        self._events: list[_Event] = []
        self._seq = itertools.count()
        cfg = self.config
        self.bucket = (
            TokenBucket(cfg.invocation_rate_limit, cfg.burst, _us(cfg.refill_interval_s)) if cfg.throttled else None
        )
        self.containers: list[Container] = []
        self._waiting: deque[_Pending] = deque()
        self._live = 0
        self.admissions: list[int] = []
        self.invocations = 0

    # -- clock -------------------------------------------------------------

    def _schedule(self, t_us: int, action: Callable[[], None]) -> None:
        heapq.heappush(self._events, _Event(t_us, next(self._seq), action))

    def step(self) -> bool:
        if not self._events:
            return False
        ev = heapq.heappop(self._events)
        self.now_us = max(self.now_us, ev.time_us)
        ev.action()
        return True

    def run(self) -> None:
        while self.step():
            pass

    def advance(self, seconds: float) -> None:
        """Move the clock forward, processing any events due in between."""
        target = self.now_us + _us(seconds)
        while self._events and self._events[0].time_us <= target:
            self.step()
        self.now_us = max(self.now_us, target)

    @property
    def now_s(self) -> float:
        return self.now_us / US

    # -- containers --------------------------------------------------------

    def _new_container(self) -> Container:
        c = Container(len(self.containers), self.workdir / f"c{len(self.containers):05d}")
        self.containers.append(c)
        self._live += 1
        return c

    def _take_warm(self) -> Container | None:
        retention = _us(self.config.warm_retention_s)
        idle = [c for c in self.containers if not c.busy and c.workdir is not None]
        for c in idle:
            if not c.warm(self.now_us, retention):
                # retention expired: the platform reclaims it
                c.workdir = None  # type: ignore[assignment]
                self._live -= 1
        warm = [c for c in idle if c.workdir is not None]
        if not warm:
            return None
        # most recently released first; container id breaks ties deterministically
        return max(warm, key=lambda c: (c.last_release_us, -c.container_id))

    def warm_count(self) -> int:
        retention = _us(self.config.warm_retention_s)
        return sum(1 for c in self.containers if c.workdir is not None and c.warm(self.now_us, retention))

    def warm_pool(self, k: int) -> None:
        """Provision containers until at least min(k, concurrency_limit) are warm.

        Provisioning bypasses the admission throttle; the clock advances by one cold start.
        """
        if k < 0:
            raise ValueError("k must be >= 0")
        self._take_warm()  # reclaim expired containers
        need = min(k, self.config.concurrency_limit) - self.warm_count()
        need = min(need, self.config.concurrency_limit - self._live)
        if need <= 0:
            return
        self.advance(0)
        ready = self.now_us + _us(self.config.cold_start_s)
        for _ in range(need):
            c = self._new_container()
            c.last_release_us = ready
        self.advance(self.config.cold_start_s)

    # -- invocation --------------------------------------------------------

    def submit(
        self,
        payload: bytes,
        callback: Callable[[WorkerResponse], None],
        delay_s: float = 0.0,
        deadline_s: float | None = None,
    ) -> None:
        at = self.now_us + _us(delay_s)
        pending = _Pending(payload, callback, at, deadline_s)
        try:
            p = decode(payload)
            pending.partition_id, pending.attempt = p.range.partition_id, p.attempt
        except DecodeError:
            pass
        self._schedule(at, lambda: self._request(pending))

    def _request(self, pending: _Pending) -> None:
        self.invocations += 1
        admit = self.bucket.reserve(self.now_us) if self.bucket is not None else self.now_us
        pending.admitted_us = admit
        self.admissions.append(admit)
        self._schedule(admit, lambda: self._admitted(pending))

    def _admitted(self, pending: _Pending) -> None:
        c = self._take_warm()
        if c is not None:
            self._start(pending, c, cold=False)
        elif self._live < self.config.concurrency_limit:
            self._start(pending, self._new_container(), cold=True)
        else:
            self._waiting.append(pending)

    def _start(self, pending: _Pending, c: Container, cold: bool) -> None:
        cfg = self.config
        c.busy = True
        key = (pending.partition_id, pending.attempt, pending.requested_us)
        startup = _us(cfg.cold_start_s if cold else cfg.warm_start_s)
        startup += _us(cfg.start_jitter_max_s * _rng.unit(cfg.seed, "start", key))
        start = self.now_us + startup

        c.workdir.mkdir(parents=True, exist_ok=True)
        staged = StagedStore(self.store)
        env = WorkerEnv(
            token_path=c.workdir / "token",
            scratch_dir=c.workdir / "scratch",
            store=staged,
            source=self.source,
            sampling_interval_s=cfg.sampling_interval_s,
            per_entry_cost_us=cfg.per_entry_cost_us,
        )
        resp = run_worker(pending.payload, env)
        trace = resp.monitoring or ExecutionTrace(pending.partition_id, pending.attempt, 0.0, 0.0)

        factor = 1.0 + cfg.service_jitter_frac * _rng.symmetric(cfg.seed, "service", key)
        factor *= 1.0 + cfg.monitor_overhead_frac
        duration = round(trace.duration * 1000 * factor)  # trace times are ms
        phases = [Phase(p.kind, p.begin * factor, p.end * factor, p.bytes) for p in trace.phases]

        timeout_s = cfg.timeout_s if pending.deadline_s is None else min(cfg.timeout_s, pending.deadline_s)
        timeout = _us(timeout_s)
        p_fail = cfg.failure.probability_for(pending.partition_id)
        killed = False
        if duration > timeout:
            duration, killed = timeout, True
            staged.discard()
            resp = WorkerResponse(
                FAILURE, pending.partition_id, pending.attempt,
                error_kind=TIMEOUT, error_message=f"killed after {timeout_s:g} s",
            )
        elif resp.ok and p_fail and _rng.unit(cfg.seed, "fail", pending.partition_id, pending.attempt) < p_fail:
            kinds = cfg.failure.kinds
            kind = kinds[int(_rng.unit(cfg.seed, "kind", pending.partition_id, pending.attempt) * len(kinds))]
            duration = round(duration * _rng.unit(cfg.seed, "crash-at", pending.partition_id, pending.attempt))
            staged.discard()
            resp = WorkerResponse(
                FAILURE, pending.partition_id, pending.attempt,
                error_kind=INJECTED, error_message=f"injected {kind}",
            )
        end = start + duration
        dur_ms = duration / 1000
        phases = [Phase(p.kind, min(p.begin, dur_ms), min(p.end, dur_ms), p.bytes) for p in phases if p.begin < dur_ms]
        samples = synthesize_samples(
            phases, dur_ms, cfg.sampling_interval_s * 1000,
            fetch_cpu=cfg.fetch_cpu_frac, process_cpu=cfg.process_cpu_frac, mem_bytes=cfg.memory_bytes,
        )
        resp.monitoring = ExecutionTrace(
            pending.partition_id, pending.attempt, start / 1000, end / 1000,
            cold=cold, killed=killed, samples=samples, phases=phases,
            status=resp.status, requested_time=pending.requested_us / 1000, admitted_time=pending.admitted_us / 1000,
        )

        def finish():
            if resp.ok:
                staged.commit()
            c.busy = False
            c.last_release_us = self.now_us
            if self._waiting:
                nxt = self._waiting.popleft()
                self._start(nxt, c, cold=False)
            pending.callback(resp)

        self._schedule(end, finish)

    def invoke_sync(self, payload: bytes, deadline_s: float | None = None) -> WorkerResponse:
        box: list[WorkerResponse] = []
        self.submit(payload, box.append, deadline_s=deadline_s)
        while not box and self.step():
            pass
        return box[0]

    def run_controllers(self, controllers: Iterable) -> None:
        for gen in controllers:
            self._drive(gen, None)
        self.run()

    def _drive(self, gen, response) -> None:
        try:
            inv: Invocation = next(gen) if response is None else gen.send(response)
        except StopIteration:
            return
        self.submit(inv.payload, lambda r: self._drive(gen, r), inv.delay_s, inv.deadline_s)

    def close(self) -> None:
        if self._own_workdir:
            shutil.rmtree(self.workdir, ignore_errors=True)
