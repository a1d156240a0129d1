import pytest

from lambdaframe.accumulators import PartialResult
from lambdaframe.dataset import EntryRange, uniform_layout
from lambdaframe.driver import execute_sequential
from lambdaframe.expr import parse_graph
from lambdaframe.monitor import FETCH, PROCESS
from lambdaframe.payload import WARMUP, Payload, encode
from lambdaframe.planner import build_plan
from lambdaframe.storage import DataSource, DataSourceConfig, MemoryObjectStore
from lambdaframe.worker import WorkerEnv, run_worker

REMOTE = uniform_layout("w", 2, 2, 50, 1 << 20, ("a", "b"), seed=1, kind="simulated_remote", requires_token=True)
GRAPH = "define s = sq(a) + b;\nfilter s < 1;\ncount 1;\nhisto1d 2 s 10 0 1;\n"
HEADER = ("inc/sq.h", b"def sq(x) = x * x;\n")


def make_env(tmp_path, virtual=True, **kw):
    return WorkerEnv(
        token_path=tmp_path / "tok" / "token",
        scratch_dir=tmp_path / "scratch",
        store=kw.pop("store", MemoryObjectStore()),
        source=DataSource(DataSourceConfig(valid_tokens={"tkt"})),
        per_entry_cost_us=10.0 if virtual else None,
        sampling_interval_s=0.01,
        **kw,
    )


def payload(rng=None, **kw):
    rng = rng or build_plan(REMOTE, 1).ranges[0]
    base = dict(range=rng, script=GRAPH, dataset=REMOTE, token=b"tkt", headers=(HEADER,), run_id="w")
    base.update(kw)
    return encode(Payload(**base))


@pytest.mark.parametrize("virtual", [True, False])
def test_success_matches_oracle(tmp_path, virtual):
    env = make_env(tmp_path, virtual)
    resp = run_worker(payload(), env)
    assert resp.ok, resp.error_message
    assert resp.result_ref == "results/w/0-1"
    got = PartialResult.decode(env.store.get(resp.result_ref))
    assert got == execute_sequential(parse_graph(GRAPH), REMOTE, [HEADER])
    assert env.token_path.read_bytes() == b"tkt"
    assert (tmp_path / "scratch" / "headers" / "inc" / "sq.h").read_bytes() == HEADER[1]
    assert resp.monitoring.start_time <= resp.monitoring.end_time


def test_virtual_phases_alternate(tmp_path):
    resp = run_worker(payload(), make_env(tmp_path))
    kinds = [p.kind for p in resp.monitoring.phases]
    assert kinds == [FETCH, PROCESS] * 4
    # 4 clusters x (60 ms fetch + 50 entries x 10 us)
    assert resp.monitoring.duration == pytest.approx(4 * 60.5)


def test_rerun_is_byte_identical(tmp_path):
    a, b = make_env(tmp_path / "a"), make_env(tmp_path / "b")
    ra, rb = run_worker(payload(), a), run_worker(payload(), b)
    assert a.store.get(ra.result_ref) == b.store.get(rb.result_ref)


def test_missing_token_is_token_error_and_stale_token_removed(tmp_path):
    env = make_env(tmp_path)
    assert run_worker(payload(), env).ok
    resp = run_worker(payload(token=None, attempt=2), env)
    assert not resp.ok and resp.error_kind == "TokenError"
    assert not env.token_path.exists()


@pytest.mark.parametrize(
    "raw, kind",
    [
        (b"garbage", "DecodeError"),
        (None, "ParseError"),
        ("typecheck", "TypeError"),
        ("store", "StoreError"),
    ],
)
def test_structured_failures(tmp_path, raw, kind):
    env = make_env(tmp_path)
    if raw is None:
        raw = payload(script="filter (;\n")
    elif raw == "typecheck":
        raw = payload(script="mean 1 nope;\n")
    elif raw == "store":
        raw = payload(dataset=None, dataset_ref="manifests/missing.json")
    resp = run_worker(raw, env)
    assert not resp.ok and resp.error_kind == kind
    assert resp.error_message


def test_fetch_errors_after_retries(tmp_path):
    env = make_env(tmp_path)
    env.source = DataSource(DataSourceConfig(valid_tokens={"tkt"}, io_error_probability=1.0))
    resp = run_worker(payload(), env)
    assert resp.error_kind == "FetchError"
    assert env.source._requests[(REMOTE.files[0].uri, 0)] == 3  # first try + 2 retries


def test_header_path_traversal_rejected(tmp_path):
    resp = run_worker(payload(headers=(("../evil.h", b"def f(x) = x;"),)), make_env(tmp_path))
    assert not resp.ok and resp.error_kind == "DecodeError"


def test_warmup_is_a_no_op(tmp_path):
    env = make_env(tmp_path)
    resp = run_worker(payload(kind=WARMUP), env)
    assert resp.ok and resp.result_ref == ""
    assert env.store.keys() == []


def test_dataset_by_reference(tmp_path):
    import json

    store = MemoryObjectStore()
    store.put("manifests/w.json", json.dumps(REMOTE.to_manifest()).encode())
    r = EntryRange(0, 0, 50, ((0, 0),))
    resp = run_worker(payload(rng=r, dataset=None, dataset_ref="manifests/w.json"), make_env(tmp_path, store=store))
    assert resp.ok
