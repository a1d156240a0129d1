"""Client side of a run: plan, invoke one controller per range, retry, reduce.

Each controller issues synchronous invocations for its range, retrying on the
same controller until it succeeds or runs out of attempts. Accepted partial
results are reduced eagerly, behind a lock, as they arrive.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .accumulators import PartialResult, reduce
from .dataset import DatasetDescriptor, EntryRange, synth_block
from .expr.executor import execute_graph
from .expr.graph import ComputationGraph, HelperFunction, format_graph, parse_helpers
from .expr.typecheck import typecheck
from .monitor import ExecutionTrace
from .payload import INLINE_DATASET_LIMIT, Payload, WorkerResponse, encode
from .planner import Plan, build_plan
from .platform.base import Backend, Controller, Invocation
from .storage import KeyExists, StoreError

log = logging.getLogger(__name__)

SUCCEEDED = "success"
FAILED = "failed"
TOKEN_ERROR = "TokenError"

__all__ = [
    "RunConfig", "RunResult", "RunError", "PartitionStatus",
    "run", "reduce", "collect_monitoring", "execute_sequential", "headers_to_helpers",
]


@dataclass
class RunConfig:
    npartitions: int
    max_retries: int = 3
    invoke_timeout_s: float = 900.0
    warmup_count: int = 0
    run_id: str = "run"
    # attempt number (2, 3, ...) -> delay in seconds before that retry; None retries immediately
    backoff: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.npartitions < 1:
            raise ValueError("npartitions must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.warmup_count < 0:
            raise ValueError("warmup_count must be >= 0")


def exponential_backoff(base_s: float = 1.0, factor: float = 2.0) -> Callable[[int], float]:
    return lambda attempt: base_s * factor ** (attempt - 2)


@dataclass
class PartitionStatus:
    attempts: int = 0
    status: str = FAILED
    error_kind: str | None = None
    error_message: str | None = None


@dataclass
class RunResult:
    run_id: str
    plan: Plan
    reduced: PartialResult
    per_partition: dict[int, PartitionStatus]
    traces: list[ExecutionTrace]
    wall_runtime_ms: float

    @property
    def ok(self) -> bool:
        return all(s.status == SUCCEEDED for s in self.per_partition.values())

    @property
    def total_invocations(self) -> int:
        return sum(s.attempts for s in self.per_partition.values())

    def final(self) -> dict[int, object]:
        return self.reduced.finalize()

    def summary(self) -> dict:
        return {
            "run_id": self.run_id,
            "npartitions": self.plan.npartitions_requested,
            "npartitions_effective": self.plan.npartitions_effective,
            "status": SUCCEEDED if self.ok else FAILED,
            "wall_runtime_ms": round(self.wall_runtime_ms, 3),
            "total_invocations": self.total_invocations,
            "partitions": {
                str(pid): {"attempts": s.attempts, "status": s.status, "error_kind": s.error_kind}
                for pid, s in sorted(self.per_partition.items())
            },
            "results": {str(k): v for k, v in self.final().items()},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2) + "\n"


class RunError(RuntimeError):
    """A partition exhausted its attempts, or the run could not start.

    ``partition_id`` is None when the run failed before any invocation.
    """

    def __init__(self, partition_id: int | None, error_kind: str, message: str, result: RunResult | None = None):
        self.partition_id = partition_id
        self.error_kind = error_kind
        self.message = message
        self.result = result
        where = "run" if partition_id is None else f"partition {partition_id}"
        super().__init__(f"{where} failed: {error_kind}: {message}")


def headers_to_helpers(headers: Iterable[tuple[str, bytes]]) -> tuple[HelperFunction, ...]:
    out: list[HelperFunction] = []
    for _, content in headers:
        out.extend(parse_helpers(content.decode()))
    return tuple(out)


def collect_monitoring(responses: Iterable[WorkerResponse]) -> list[ExecutionTrace]:
    """One trace per returned attempt, ordered by (partition, attempt)."""
    traces = []
    for r in responses:
        if r.monitoring is None:
            continue
        r.monitoring.partition_id = r.partition_id
        r.monitoring.attempt = r.attempt
        traces.append(r.monitoring)
    return sorted(traces, key=lambda t: (t.partition_id, t.attempt))


def wall_runtime(traces: Sequence[ExecutionTrace]) -> float:
    if not traces:
        return 0.0
    return max(t.end_time for t in traces) - min(t.start_time for t in traces)


def _dataset_fields(d: DatasetDescriptor, backend: Backend, run_id: str) -> dict:
    manifest = json.dumps(d.to_manifest(), sort_keys=True, separators=(",", ":")).encode()
    if len(manifest) <= INLINE_DATASET_LIMIT:
        return {"dataset": d}
    key = f"manifests/{run_id}.json"
    try:
        backend.store.put(key, manifest)
    except KeyExists:
        if backend.store.get(key) != manifest:
            raise
    return {"dataset_ref": key}


def run(
    graph: ComputationGraph,
    dataset: DatasetDescriptor,
    config: RunConfig,
    backend: Backend,
    token: bytes | None = None,
    headers: Sequence[tuple[str, bytes]] = (),
) -> RunResult:
    typecheck(graph, dataset.columns, headers_to_helpers(headers))
    if dataset.requires_token and not backend.source.authorized(token):
        what = "no token given" if token is None else "token rejected"
        raise RunError(None, TOKEN_ERROR, f"dataset metadata needs a valid token ({what})")

    plan = build_plan(dataset, config.npartitions)
    script = format_graph(graph)
    ds = _dataset_fields(dataset, backend, config.run_id)
    if config.warmup_count:
        backend.warm_pool(config.warmup_count)

    lock = threading.Lock()
    state = {"reduced": PartialResult.identity(graph)}
    statuses = {r.partition_id: PartitionStatus() for r in plan.ranges}
    responses: list[WorkerResponse] = []

    def accept(resp: WorkerResponse) -> None:
        part = PartialResult.decode(backend.store.get(resp.result_ref))
        with lock:
            state["reduced"] = reduce(state["reduced"], part)

    def controller(r: EntryRange) -> Controller:
        base = Payload(
            range=r, script=script, token=token, headers=tuple(headers), run_id=config.run_id, **ds
        )
        st = statuses[r.partition_id]
        for attempt in range(1, config.max_retries + 2):
            delay = config.backoff(attempt) if config.backoff and attempt > 1 else 0.0
            resp = yield Invocation(encode(base.with_attempt(attempt)), delay, config.invoke_timeout_s)
            st.attempts = attempt
            with lock:
                responses.append(resp)
            if resp.ok:
                try:
                    accept(resp)
                except (StoreError, ValueError, KeyError) as e:
                    st.error_kind, st.error_message = "StoreError", f"cannot read result: {e}"
                    continue
                st.status, st.error_kind, st.error_message = SUCCEEDED, None, None
                return
            st.error_kind, st.error_message = resp.error_kind, resp.error_message
            log.info("partition %d attempt %d failed: %s", r.partition_id, attempt, resp.error_kind)

    backend.run_controllers([controller(r) for r in plan.ranges])

    traces = collect_monitoring(responses)
    result = RunResult(config.run_id, plan, state["reduced"], statuses, traces, wall_runtime(traces))
    failed = sorted(pid for pid, s in statuses.items() if s.status != SUCCEEDED)
    if failed:
        s = statuses[failed[0]]
        raise RunError(failed[0], s.error_kind or "Unknown", s.error_message or "", result)
    return result


def execute_sequential(
    graph: ComputationGraph,
    dataset: DatasetDescriptor,
    headers: Sequence[tuple[str, bytes]] = (),
) -> PartialResult:
    """Single-process oracle: the whole dataset as one range, values generated directly."""
    offsets = dataset.file_offsets()

    def fetch(fi: int, ci: int):
        c = dataset.files[fi].clusters[ci]
        begin = offsets[fi] + c.first_entry
        return {
            name: synth_block(dataset.seed, k, begin, begin + c.span) for k, name in enumerate(dataset.columns)
        }

    refs = tuple(dataset.cluster_refs())
    whole = EntryRange(0, 0, sum(f.entries for f in dataset.files), refs)
    return execute_graph(graph, dataset, whole, fetch, headers_to_helpers(headers))
