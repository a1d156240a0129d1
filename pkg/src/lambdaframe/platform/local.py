"""Real worker processes over loopback.

Each pooled process runs ``python -m lambdaframe.platform.local_worker``, connects
back to the platform's listening socket and serves one request at a time. The pool
reuses the most recently released process first and never exceeds
``concurrency_limit``. A timeout kills the process. This backend exists to check the
protocol and retry path against real processes; its timings carry no meaning.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import socket
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..monitor import ExecutionTrace
from ..payload import FAILURE, DecodeError, WorkerResponse, decode, decode_response
from ..storage import DataSource, DataSourceConfig, DirObjectStore
from .base import TIMEOUT, TRANSPORT, Backend, Controller
from .config import PlatformConfig
from .framing import FramingError, recv_message, send_message
from .throttle import TokenBucket

log = logging.getLogger(__name__)

SPAWN_TIMEOUT_S = 60.0


@dataclass
class _Proc:
    proc: subprocess.Popen
    sock: socket.socket
    workdir: Path

    def kill(self) -> None:
        try:
            self.sock.close()
        finally:
            if self.proc.poll() is None:
                self.proc.kill()
            self.proc.wait()


class LocalPlatform(Backend):
    name = "local"

    def __init__(
        self,
        config: PlatformConfig | None = None,
        source_config: DataSourceConfig | None = None,
        store_root: str | Path | None = None,
        workdir: str | Path | None = None,
    ):
        self.config = config or PlatformConfig(invocation_rate_limit=None)
        self.source_config = source_config or DataSourceConfig(seed=self.config.seed)
        self.source = DataSource(self.source_config)
        self._own_workdir = workdir is None
        self.workdir = Path(workdir) if workdir is not None else Path(tempfile.mkdtemp(prefix="lambdaframe-local-"))
        self.store = DirObjectStore(store_root if store_root is not None else self.workdir / "store")
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(64)
        self._listener.settimeout(SPAWN_TIMEOUT_S)
        self.address = self._listener.getsockname()
        self._idle: list[_Proc] = []
        self._live = 0
        self._spawned = 0
        self._cond = threading.Condition()
        self._spawn_lock = threading.Lock()
        self._hellos: dict[int, socket.socket] = {}
        cfg = self.config
        self._bucket = (
            TokenBucket(cfg.invocation_rate_limit, cfg.burst, round(cfg.refill_interval_s * 1e6))
            if cfg.throttled else None
        )
        self._bucket_lock = threading.Lock()
        self._t0 = time.monotonic()

    # -- process pool -------------------------------------------------------

    def _spawn(self) -> _Proc:
        with self._spawn_lock:
            n = self._spawned
            self._spawned += 1
            wd = self.workdir / f"w{n:05d}"
            (wd / "scratch").mkdir(parents=True, exist_ok=True)
            env = dict(os.environ)
            env.update(
                TOKEN_PATH=str(wd / "token"),
                SCRATCH_DIR=str(wd / "scratch"),
                SAMPLING_MS=str(round(self.config.sampling_interval_s * 1000)),
            )
            cmd = [
                sys.executable, "-m", "lambdaframe.platform.local_worker",
                "--connect", f"{self.address[0]}:{self.address[1]}",
                "--store", str(self.store.root),
                "--source", json.dumps(self.source_config.to_json()),
            ]
            proc = subprocess.Popen(cmd, env=env, stdin=subprocess.DEVNULL)
            # accept connections until this process says hello
            while proc.pid not in self._hellos:
                conn, _ = self._listener.accept()
                conn.settimeout(SPAWN_TIMEOUT_S)
                pid = int(recv_message(conn).decode())
                self._hellos[pid] = conn
            sock = self._hellos.pop(proc.pid)
            sock.settimeout(None)
            return _Proc(proc, sock, wd)

    def _acquire(self) -> tuple[_Proc, bool]:
        with self._cond:
            while not self._idle and self._live >= self.config.concurrency_limit:
                self._cond.wait()
            if self._idle:
                return self._idle.pop(), False
            self._live += 1
        try:
            return self._spawn(), True
        except BaseException:
            with self._cond:
                self._live -= 1
                self._cond.notify()
            raise

    def _release(self, p: _Proc, healthy: bool) -> None:
        if not healthy:
            p.kill()
        with self._cond:
            if healthy:
                self._idle.append(p)
            else:
                self._live -= 1
            self._cond.notify()

    def warm_pool(self, k: int) -> None:
        if k < 0:
            raise ValueError("k must be >= 0")
        with self._cond:
            need = min(k, self.config.concurrency_limit) - len(self._idle)
            need = min(need, self.config.concurrency_limit - self._live)
            self._live += max(need, 0)
        fresh = [self._spawn() for _ in range(max(need, 0))]
        with self._cond:
            self._idle.extend(fresh)
            self._cond.notify_all()

    # -- invocation ---------------------------------------------------------

    def _now_ms(self) -> float:
        return time.time() * 1000.0

    def _admit(self) -> None:
        if self._bucket is None:
            return
        with self._bucket_lock:
            now_us = round((time.monotonic() - self._t0) * 1e6)
            at = self._bucket.reserve(now_us)
        delay = at / 1e6 - (time.monotonic() - self._t0)
        if delay > 0:
            time.sleep(delay)

    def invoke_sync(self, payload: bytes, deadline_s: float | None = None) -> WorkerResponse:
        try:
            p = decode(payload)
            pid, attempt = p.range.partition_id, p.attempt
        except DecodeError:
            pid, attempt = -1, 0
        requested = self._now_ms()
        self._admit()
        admitted = self._now_ms()
        timeout = self.config.timeout_s if deadline_s is None else min(self.config.timeout_s, deadline_s)
        proc, cold = self._acquire()
        start = self._now_ms()
        try:
            proc.sock.settimeout(timeout)
            send_message(proc.sock, payload)
            raw = recv_message(proc.sock)
            resp = decode_response(raw)
        except socket.timeout:
            self._release(proc, healthy=False)
            trace = ExecutionTrace(pid, attempt, start, start + timeout * 1000, cold=cold, killed=True, status=FAILURE)
            return WorkerResponse(
                FAILURE, pid, attempt, error_kind=TIMEOUT, error_message=f"killed after {timeout:g} s", monitoring=trace
            )
        except (FramingError, OSError, DecodeError) as e:
            self._release(proc, healthy=False)
            trace = ExecutionTrace(pid, attempt, start, self._now_ms(), cold=cold, status=FAILURE)
            return WorkerResponse(FAILURE, pid, attempt, error_kind=TRANSPORT, error_message=str(e), monitoring=trace)
        self._release(proc, healthy=True)
        if resp.monitoring is not None:
            resp.monitoring.cold = cold
            resp.monitoring.requested_time = requested
            resp.monitoring.admitted_time = admitted
        return resp

    def run_controllers(self, controllers: Iterable[Controller]) -> None:
        errors: list[BaseException] = []

        def drive(gen: Controller) -> None:
            try:
                inv = next(gen)
                while True:
                    if inv.delay_s > 0:
                        time.sleep(inv.delay_s)
                    inv = gen.send(self.invoke_sync(inv.payload, inv.deadline_s))
            except StopIteration:
                pass
            except BaseException as e:  # surfaced after all threads join
                errors.append(e)

        threads = [threading.Thread(target=drive, args=(g,), daemon=True) for g in controllers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

    def close(self) -> None:
        with self._cond:
            idle, self._idle = self._idle, []
            self._live -= len(idle)
        for p in idle:
            p.kill()
        self._listener.close()
        if self._own_workdir:
            shutil.rmtree(self.workdir, ignore_errors=True)
