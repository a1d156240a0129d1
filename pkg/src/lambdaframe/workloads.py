"""Preset workloads: a CPU-bound means benchmark and a data-bound two-cut selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import SIMULATED_REMOTE, ClusterInfo, DatasetDescriptor, FileDescriptor, uniform_layout
from .expr.graph import ComputationGraph, parse_graph
from .expr.typecheck import typecheck
from .driver import headers_to_helpers

CPU_BOUND = "cpu_bound"
PPS_LIKE = "pps_like"
WORKLOADS = (CPU_BOUND, PPS_LIKE)

CPU_COLUMNS = ("c0", "c1", "c2")
MEANS_PER_COLUMN = 10

# Sweep layout: 2**20 entries in 512 clusters, so every P in 8..512 splits evenly.
SWEEP_SCALE = 1 << 20
SWEEP_CLUSTER_SPAN = 2048
# Total work W is about 6711 s, so one invocation at P=8 (about 839 s) fits the
# 900 s timeout with room for service jitter.
SWEEP_ENTRY_COST_US = 6400

DEFAULT_TOKEN = "pps-ticket"
CORR_HEADER = ("include/corr.h", b"def corr(a, b) = abs(a - b);\n")


@dataclass(frozen=True)
class WorkloadPreset:
    name: str
    dataset: DatasetDescriptor
    graph: ComputationGraph
    per_entry_cost_us: float
    sampling_interval_s: float = 1.0
    headers: tuple[tuple[str, bytes], ...] = ()

    def __post_init__(self):
        typecheck(self.graph, self.dataset.columns, headers_to_helpers(self.headers))

    @property
    def requires_token(self) -> bool:
        return self.dataset.requires_token


def cpu_bound_graph() -> ComputationGraph:
    lines = []
    aid = 1
    for col in CPU_COLUMNS:
        for _ in range(MEANS_PER_COLUMN):
            lines.append(f"mean {aid} {col};")
            aid += 1
    return parse_graph("\n".join(lines) + "\n")


def build_cpu_bound(
    scale: int = 10**6,
    cluster_span: int = 100_000,
    seed: int = 42,
    files: int = 1,
    bytes_per_entry: int = 24,
) -> tuple[DatasetDescriptor, ComputationGraph]:
    """Synthetic 3-column dataset of ``scale`` entries spread over ``files`` files,
    with 30 Mean actions (10 per column)."""
    if scale < 1 or cluster_span < 1 or files < 1:
        raise ValueError("scale, cluster_span and files must be >= 1")
    per_file = [scale // files + (1 if i < scale % files else 0) for i in range(files)]
    fds = []
    for fi, n in enumerate(per_file):
        clusters = []
        for first in range(0, n, cluster_span):
            last = min(n, first + cluster_span)
            clusters.append(ClusterInfo(first, last, (last - first) * bytes_per_entry))
        fds.append(FileDescriptor(f"mem://cpu_bound/file{fi:04d}.root", tuple(clusters)))
    return DatasetDescriptor("cpu_bound", tuple(f for f in fds if f.clusters), CPU_COLUMNS, seed), cpu_bound_graph()


def pps_thresholds(selectivity: float) -> tuple[float, float]:
    """Cut values splitting ``selectivity`` evenly over the two filters.

    With independent uniform columns, ``c0 < a`` passes ``a`` and ``|c1 - c2| < w``
    passes ``1 - (1 - w)**2``; each is set to ``sqrt(selectivity)``.
    """
    if not 0.0 < selectivity <= 1.0:
        raise ValueError("selectivity must be in (0, 1]")
    a = math.sqrt(selectivity)
    w = 1.0 - math.sqrt(1.0 - a)
    return a, w


def pps_graph(selectivity: float) -> ComputationGraph:
    a, w = pps_thresholds(selectivity)
    src = (
        "define xi = (c1 + c2) / 2;\n"
        f"filter c0 < {a!r};\n"
        f"filter corr(c1, c2) < {w!r};\n"
        "count 1;\n"
        "histo1d 2 xi 50 0 1;\n"
    )
    return parse_graph(src)


def build_pps_like(
    files: int = 64,
    clusters_per_file: int = 16,
    bytes_per_cluster: int = 1 << 20,
    selectivity: float = 0.05,
    entries_per_cluster: int = 4096,
    seed: int = 7,
) -> tuple[DatasetDescriptor, ComputationGraph]:
    """Token-gated remote files; Define, two chained Filters, then Count and a 50-bin histogram.

    The second cut calls ``corr``, which ships as a header (see ``CORR_HEADER``).
    """
    d = uniform_layout(
        "pps_like", files, clusters_per_file, entries_per_cluster, bytes_per_cluster,
        ("c0", "c1", "c2"), seed=seed, kind=SIMULATED_REMOTE, requires_token=True, uri_prefix="root://eos.sim/",
    )
    return d, pps_graph(selectivity)


def preset(
    name: str, scale: int | None = None, seed: int | None = None, cluster_span: int | None = None
) -> WorkloadPreset:
    """Desk-scale defaults. ``cpu_bound`` uses the sweep layout unless ``scale`` is given;
    then clusters default to at most 10**5 entries and at least 64 clusters when possible."""
    if name == CPU_BOUND:
        if scale is None:
            span = SWEEP_CLUSTER_SPAN if cluster_span is None else cluster_span
            d, g = build_cpu_bound(SWEEP_SCALE, span, seed=42 if seed is None else seed)
            return WorkloadPreset(name, d, g, SWEEP_ENTRY_COST_US, 1.0)
        span = min(100_000, max(1, scale // 64)) if cluster_span is None else cluster_span
        d, g = build_cpu_bound(scale, span, seed=42 if seed is None else seed)
        return WorkloadPreset(name, d, g, 1.0, 1.0)
    if name == PPS_LIKE:
        d, g = build_pps_like(seed=7 if seed is None else seed)
        return WorkloadPreset(name, d, g, 50.0, 0.010, (CORR_HEADER,))
    raise ValueError(f"unknown workload {name!r}; choose from {', '.join(WORKLOADS)}")
