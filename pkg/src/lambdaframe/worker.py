"""The serverless function body.

Sequence per invocation: decode the payload, write the token to ``TOKEN_PATH``,
materialize and declare headers, start the monitor, run the graph over the
range, store the partial result, stop the monitor, return the monitoring trace.
Every error is turned into a failure response; nothing propagates out.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

from .accumulators import PartialResult
from .dataset import DatasetDescriptor, EntryRange
from .expr.executor import GraphExecutor
from .expr.evaluate import EvalError
from .expr.graph import ComputationGraph, HelperFunction, parse_graph, parse_helpers
from .expr.parser import ParseError
from .expr.typecheck import TypeCheckError, typecheck
from .monitor import FETCH, PROCESS, ExecutionTrace, Phase, WallMonitor
from .payload import FAILURE, SUCCESS, WARMUP, DecodeError, Payload, WorkerResponse, decode
from .storage import AuthError, DataSource, FetchError, FetchStats, ObjectStore, StoreError, result_key

log = logging.getLogger(__name__)


@dataclass
class WorkerEnv:
    token_path: Path
    scratch_dir: Path
    store: ObjectStore
    source: DataSource
    sampling_interval_s: float = 1.0
    # Set by the simulator: phases are timed with this cost model instead of the wall clock.
    per_entry_cost_us: float | None = None
    fetch_retries: int = 2
    strict: bool = False

    def __post_init__(self):
        self.token_path = Path(self.token_path)
        self.scratch_dir = Path(self.scratch_dir)
        if self.sampling_interval_s <= 0:
            raise ValueError("sampling interval must be positive")

    @classmethod
    def from_environ(cls, store: ObjectStore, source: DataSource, environ=os.environ) -> "WorkerEnv":
        scratch = Path(environ.get("SCRATCH_DIR", "/tmp/lambdaframe-scratch"))
        return cls(
            token_path=Path(environ.get("TOKEN_PATH", str(scratch / "token"))),
            scratch_dir=scratch,
            store=store,
            source=source,
            sampling_interval_s=float(environ.get("SAMPLING_MS", "1000")) / 1000.0,
        )


class VirtualTimer:
    """Phase clock driven by the cost model; time only moves when work is charged."""

    def __init__(self, per_entry_cost_us: float):
        self.per_entry_cost_us = per_entry_cost_us
        self.cursor_us = 0

    def now(self) -> float:
        return self.cursor_us / 1000.0

    def charge_fetch(self, stats: FetchStats) -> None:
        self.cursor_us += stats.duration_us

    def charge_process(self, entries: int) -> None:
        self.cursor_us += round(entries * self.per_entry_cost_us)


class WallTimer:
    def __init__(self, monitor: WallMonitor):
        self.monitor = monitor

    def now(self) -> float:
        return self.monitor.now()

    def charge_fetch(self, stats: FetchStats) -> None:
        pass

    def charge_process(self, entries: int) -> None:
        pass


def fetch_process_loop(
    g: ComputationGraph,
    d: DatasetDescriptor,
    r: EntryRange,
    source: DataSource,
    timer,
    token_reader=lambda: None,
    helpers: tuple[HelperFunction, ...] = (),
    retries: int = 2,
    strict: bool = False,
) -> tuple[PartialResult, list[Phase]]:
    """Alternate fetch and process per cluster; return the result and the phase intervals.

    Local (synthetic) reads produce no fetch phase.
    """
    ex = GraphExecutor(g, helpers, strict)
    phases: list[Phase] = []
    for fi, ci in r.cluster_ids:
        t0 = timer.now()
        for attempt in range(retries + 1):
            try:
                data, stats = source.fetch_cluster(d, fi, ci, token_reader())
                break
            except AuthError:
                raise
            except FetchError:
                if attempt == retries:
                    raise
                log.info("retrying fetch of file %d cluster %d", fi, ci)
        timer.charge_fetch(stats)
        t1 = timer.now()
        if stats.remote:
            phases.append(Phase(FETCH, t0, t1, stats.bytes))
        n = d.files[fi].clusters[ci].span
        ex.process(data, n)
        timer.charge_process(n)
        phases.append(Phase(PROCESS, t1, timer.now()))
    return ex.result(), phases


def _safe_header_path(scratch: Path, virtual: str) -> Path:
    parts = [p for p in PurePosixPath(virtual).parts if p not in ("/", "")]
    if not parts or any(p in (".", "..") for p in parts):
        raise ValueError(f"bad header path {virtual!r}")
    return scratch.joinpath("headers", *parts)


def _failure(p: Payload | None, kind: str, message: str, trace: ExecutionTrace | None) -> WorkerResponse:
    pid = p.range.partition_id if p is not None else -1
    attempt = p.attempt if p is not None else 0
    if trace is not None:
        trace.status = FAILURE
    return WorkerResponse(FAILURE, pid, attempt, error_kind=kind, error_message=message, monitoring=trace)


def _empty_trace(p: Payload | None, virtual: bool) -> ExecutionTrace:
    t = 0.0 if virtual else time.time() * 1000.0
    pid = p.range.partition_id if p is not None else -1
    return ExecutionTrace(pid, p.attempt if p is not None else 0, t, t)


def run_worker(b: bytes, env: WorkerEnv) -> WorkerResponse:
    virtual = env.per_entry_cost_us is not None
    try:
        p = decode(b)
    except DecodeError as e:
        return _failure(None, "DecodeError", str(e), _empty_trace(None, virtual))

    if p.kind == WARMUP:
        return WorkerResponse(SUCCESS, p.range.partition_id, p.attempt, result_ref="", monitoring=_empty_trace(p, virtual))

    try:
        env.token_path.parent.mkdir(parents=True, exist_ok=True)
        if p.token is not None:
            env.token_path.write_bytes(p.token)
        elif env.token_path.exists():
            env.token_path.unlink()
    except OSError as e:
        return _failure(p, "TokenError", f"cannot write token: {e}", _empty_trace(p, virtual))

    try:
        dataset = p.dataset
        if dataset is None:
            dataset = DatasetDescriptor.from_manifest(json.loads(env.store.get(p.dataset_ref)))
    except (StoreError, ValueError, KeyError) as e:
        return _failure(p, "StoreError", f"cannot resolve dataset: {e}", _empty_trace(p, virtual))

    helpers: list[HelperFunction] = []
    try:
        for virtual_path, content in p.headers:
            target = _safe_header_path(env.scratch_dir, virtual_path)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(content)
            helpers.extend(parse_helpers(target.read_text()))
        graph = parse_graph(p.script)
        typecheck(graph, dataset.columns, helpers)
    except ParseError as e:
        return _failure(p, "ParseError", str(e), _empty_trace(p, virtual))
    except TypeCheckError as e:
        return _failure(p, "TypeError", str(e), _empty_trace(p, virtual))
    except (OSError, ValueError, UnicodeDecodeError) as e:
        return _failure(p, "DecodeError", f"bad header: {e}", _empty_trace(p, virtual))

    def read_token():
        try:
            return env.token_path.read_bytes()
        except FileNotFoundError:
            return None

    if virtual:
        monitor = None
        timer = VirtualTimer(env.per_entry_cost_us)
        start = 0.0
    else:
        monitor = WallMonitor(env.sampling_interval_s)
        monitor.start()
        timer = WallTimer(monitor)
        start = time.time() * 1000.0

    def trace_now() -> ExecutionTrace:
        samples = monitor.stop() if monitor is not None else []
        end = timer.now() + start if monitor is None else time.time() * 1000.0
        return ExecutionTrace(p.range.partition_id, p.attempt, start, end, samples=samples, phases=phases)

    phases: list[Phase] = []
    try:
        result, phases = fetch_process_loop(
            graph, dataset, p.range, env.source, timer, read_token, tuple(helpers), env.fetch_retries, env.strict
        )
        key = result_key(p.run_id, p.range.partition_id, p.attempt)
        env.store.put(key, result.encode())
    except AuthError as e:
        return _failure(p, "TokenError", str(e), trace_now())
    except FetchError as e:
        return _failure(p, "FetchError", str(e), trace_now())
    except StoreError as e:
        return _failure(p, "StoreError", str(e), trace_now())
    except EvalError as e:
        return _failure(p, "EvalError", str(e), trace_now())
    except Exception as e:  # the boundary: never raise to the platform
        log.exception("worker failure")
        return _failure(p, type(e).__name__, str(e), trace_now())
    return WorkerResponse(SUCCESS, p.range.partition_id, p.attempt, result_ref=key, monitoring=trace_now())
