import socket
import threading

import pytest

from lambdaframe.accumulators import PartialResult
from lambdaframe.dataset import EntryRange, uniform_layout
from lambdaframe.payload import Payload, encode
from lambdaframe.platform import Invocation, LocalPlatform, PlatformConfig
from lambdaframe.platform.framing import FramingError, recv_message, send_message
from lambdaframe.storage import DataSourceConfig

D = uniform_layout("l", 1, 2, 1000, 8000, ("a",), seed=2)


def pl(pid=0, attempt=1, d=D, clusters=((0, 0),), script="mean 1 a;\n", token=None):
    r = EntryRange(pid, 0, 0, tuple(clusters))
    return encode(Payload(r, script, dataset=d, run_id="loc", attempt=attempt, token=token))


def test_framing_round_trip():
    a, b = socket.socketpair()
    with a, b:
        for body in (b"", b"x", bytes(range(256)) * 5000):
            t = threading.Thread(target=send_message, args=(a, body))
            t.start()
            assert recv_message(b) == body
            t.join()
        a.sendall(b"\x00\x00\x00\x09abc")
        a.close()
        with pytest.raises(FramingError):
            recv_message(b)


@pytest.fixture
def local(tmp_path):
    p = LocalPlatform(PlatformConfig(invocation_rate_limit=None, concurrency_limit=2),
                      DataSourceConfig(valid_tokens={"tk"}), workdir=tmp_path / "w")
    yield p
    p.close()


def test_invoke_and_reuse(local):
    r1 = local.invoke_sync(pl(0))
    r2 = local.invoke_sync(pl(1, clusters=((0, 1),)))
    assert r1.ok and r2.ok, (r1.error_message, r2.error_message)
    assert r1.monitoring.cold and not r2.monitoring.cold
    assert PartialResult.decode(local.store.get(r1.result_ref)).actions[1].n == 1000
    assert (local.workdir / "store" / "results" / "loc" / "0-1").is_file()


def test_token_file_gates_remote_reads(local):
    remote = uniform_layout("r", 1, 1, 10, 100, ("a",), kind="simulated_remote", requires_token=True)
    bad = local.invoke_sync(pl(0, d=remote))
    assert bad.error_kind == "TokenError"
    good = local.invoke_sync(pl(0, attempt=2, d=remote, token=b"tk"))
    assert good.ok


def test_timeout_kills_the_process(local):
    big = uniform_layout("b", 1, 1, 3_000_000, 8, ("a",))
    r = local.invoke_sync(pl(0, d=big, script="define x = sqrt(a) * sin(a) + exp(a);\nmean 1 x;\n"), deadline_s=0.01)
    assert r.error_kind == "Timeout" and r.monitoring.killed
    assert local._live == 0
    assert local.invoke_sync(pl(1)).ok


def test_dead_worker_is_a_transport_error(local):
    local.warm_pool(1)
    local._idle[0].proc.kill()
    local._idle[0].proc.wait()
    r = local.invoke_sync(pl(0))
    assert r.error_kind == "TransportError"
    assert local.invoke_sync(pl(0, attempt=2)).ok


def test_pool_never_exceeds_limit(local):
    def controller(pid):
        resp = yield Invocation(pl(pid))
        assert resp.ok

    local.run_controllers([controller(i) for i in range(6)])
    assert local._spawned <= 2
