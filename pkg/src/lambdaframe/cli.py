"""Command line: plan, run, sweep, report.

Outputs go under ``--out`` with fixed names (summary.json, traces.csv, speedup.csv).
Diagnostics go to standard error. Exit codes: 0 success, 1 run failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .dataset import ValidationError, load_manifest
from .driver import RunError
from .experiment import (
    BACKENDS, SIM, SPEEDUP_CSV_HEADER, make_backend, platform_config_for, run_preset,
    source_config_for, split_config, sweep,
)
from .monitor import write_traces_csv
from .planner import InvalidPartitions, build_plan
from .platform import FailureSpec, load_config
from .report import report_from_file
from .workloads import WORKLOADS, preset

log = logging.getLogger("lambdaframe")

DEFAULT_SWEEP = "8,16,32,64,128,256,512"


def _partitions(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or any(p < 1 for p in out):
        raise argparse.ArgumentTypeError("partition counts must be >= 1")
    return out


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workload", choices=WORKLOADS, required=True)
    p.add_argument("--backend", choices=BACKENDS, default=SIM)
    p.add_argument("--token", help="credential shipped to workers (needed by pps_like)")
    p.add_argument("--config", type=Path, help="platform/source config, JSON or TOML")
    p.add_argument("--seed", type=int, help="dataset seed (workload default if omitted)")
    p.add_argument("--platform-seed", type=int, help="seed for jitter and failure injection")
    p.add_argument("--scale", type=int, help="cpu_bound entries (default: the 2**20-entry sweep layout)")
    p.add_argument("--cluster-span", type=int, help="cpu_bound entries per cluster")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--rate-limit", type=float, help="admissions per second; 0 disables the throttle")
    p.add_argument("--failure-prob", type=float, help="injected failure probability per attempt (sim)")
    p.add_argument("--out", type=Path, default=Path("out"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lambdaframe", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print the partition plan of a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--npartitions", type=int, required=True)

    p = sub.add_parser("run", help="execute one workload")
    _add_run_flags(p)
    p.add_argument("--npartitions", type=int, required=True)
    p.add_argument("--warmup", type=int, default=0, help="containers to pre-warm")
    p.add_argument("--run-id")

    p = sub.add_parser("sweep", help="run a workload over several partition counts")
    _add_run_flags(p)
    p.add_argument("--partitions", type=_partitions, default=_partitions(DEFAULT_SWEEP))
    p.add_argument("--warmup", type=int, help="containers to pre-warm per run (default: P)")

    p = sub.add_parser("report", help="derive figure CSVs from a traces file")
    p.add_argument("--traces", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--bucket-ms", type=float, default=1000.0)
    p.add_argument("--partition", type=int, help="execution shown in single_trace.csv")
    return ap


def _configs(args):
    pdoc, sdoc = split_config(load_config(args.config)) if args.config else ({}, {})
    wp = preset(args.workload, args.scale, args.seed, args.cluster_span)
    if args.rate_limit is not None:
        pdoc["invocation_rate_limit"] = args.rate_limit or None
    if args.platform_seed is not None:
        pdoc["seed"] = args.platform_seed
    if args.failure_prob is not None:
        pdoc["failure"] = FailureSpec(args.failure_prob)
    pconf = platform_config_for(wp, pdoc)
    sconf = source_config_for(sdoc, seed=pconf.seed)
    token = args.token.encode() if args.token is not None else None
    return wp, pconf, sconf, token


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def cmd_plan(args) -> int:
    plan = build_plan(load_manifest(args.manifest), args.npartitions)
    print(json.dumps(plan.to_dict(), sort_keys=True, indent=2))
    return 0


def cmd_run(args) -> int:
    wp, pconf, sconf, token = _configs(args)
    args.out.mkdir(parents=True, exist_ok=True)
    backend = make_backend(args.backend, pconf, sconf)
    try:
        result = run_preset(wp, backend, args.npartitions, token, args.max_retries, args.warmup, args.run_id)
    except RunError as e:
        if e.result is not None:
            _write_json(args.out / "summary.json", e.result.summary())
            write_traces_csv(e.result.traces, args.out / "traces.csv")
        print(f"error: {e}", file=sys.stderr)
        return 1
    finally:
        backend.close()
    (args.out / "summary.json").write_text(result.summary_json())
    write_traces_csv(result.traces, args.out / "traces.csv")
    log.info("wall runtime %.3f s over %d invocations", result.wall_runtime_ms / 1000, result.total_invocations)
    return 0


def write_speedup_csv(rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPEEDUP_CSV_HEADER)
        for p, rt, sp, lin, spread, model, msp in rows:
            w.writerow([p, f"{rt:.6f}", f"{sp:.6f}", f"{lin:.6f}", f"{spread:.3f}", f"{model:.6f}", f"{msp:.6f}"])


def cmd_sweep(args) -> int:
    wp, pconf, sconf, token = _configs(args)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        res = sweep(wp, args.partitions, pconf, sconf, args.backend, token, args.max_retries, args.warmup)
    except RunError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for p, r in res.runs.items():
        d = args.out / f"p{p:04d}"
        d.mkdir(exist_ok=True)
        (d / "summary.json").write_text(r.summary_json())
        write_traces_csv(r.traces, d / "traces.csv")
    _write_json(args.out / "summary.json", res.summary())
    # the top-level traces are those of the largest partition count
    write_traces_csv(res.runs[max(res.runs)].traces, args.out / "traces.csv")
    write_speedup_csv(res.rows, args.out / "speedup.csv")
    return 0


def cmd_report(args) -> int:
    for path in report_from_file(args.traces, args.out, args.bucket_ms, args.partition):
        log.info("wrote %s", path)
    return 0


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InvalidPartitions, ValidationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
