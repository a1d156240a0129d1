import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lambdaframe.dataset import synth_block, uniform_layout
from lambdaframe.storage import (
    AuthError, DataSource, DataSourceConfig, DirObjectStore, InjectedIOError, KeyExists, KeyNotFound,
    MemoryObjectStore, StagedStore, StoreError, result_key,
)

MiB = 1 << 20
REMOTE = uniform_layout("r", 2, 3, 100, MiB, ("a", "b"), seed=4, kind="simulated_remote", requires_token=True)
PUBLIC = uniform_layout("q", 1, 2, 100, MiB, ("a",), kind="simulated_remote")


def test_token_gating():
    src = DataSource(DataSourceConfig(valid_tokens={"t1"}))
    with pytest.raises(AuthError):
        src.fetch_cluster(REMOTE, 0, 0, None)
    with pytest.raises(AuthError):
        src.fetch_cluster(REMOTE, 0, 0, b"other")
    data, stats = src.fetch_cluster(REMOTE, 0, 0, b"t1\n")
    assert stats.remote and stats.bytes == MiB
    # defaults: 50 ms + 1 MiB at 100 MiB/s
    assert stats.duration_us == 60_000
    src.fetch_cluster(PUBLIC, 0, 1, None)


def test_cluster_content_comes_from_the_seed():
    src = DataSource(DataSourceConfig(valid_tokens={"t"}))
    data, _ = src.fetch_cluster(REMOTE, 1, 2, b"t")
    begin = 300 + 200
    assert (data["b"] == synth_block(4, 1, begin, begin + 100)).all()
    assert set(data) == {"a", "b"}


def test_synthetic_reads_are_free():
    d = uniform_layout("s", 1, 1, 10, 80, ("a",))
    _, stats = DataSource().fetch_cluster(d, 0, 0)
    assert (stats.duration_us, stats.remote) == (0, False)


def test_jitter_and_injected_errors_are_seeded():
    cfg = DataSourceConfig(valid_tokens={"t"}, per_request_jitter_frac=0.5, seed=3)
    a = [DataSource(cfg).fetch_cluster(REMOTE, 0, c, b"t")[1].duration_us for c in range(3)]
    b = [DataSource(cfg).fetch_cluster(REMOTE, 0, c, b"t")[1].duration_us for c in range(3)]
    assert a == b and len(set(a)) > 1
    assert all(30_000 <= x <= 90_000 for x in a)
    failing = DataSource(DataSourceConfig(io_error_probability=1.0))
    with pytest.raises(InjectedIOError):
        failing.fetch_cluster(PUBLIC, 0, 0)


def test_ledger_counts_successful_reads():
    src = DataSource(DataSourceConfig(valid_tokens={"t"}))
    for c in range(3):
        src.fetch_cluster(REMOTE, 0, c, b"t")
    with pytest.raises(AuthError):
        src.fetch_cluster(REMOTE, 1, 0, None)
    assert set(src.ledger.values()) == {1} and len(src.ledger) == 3
    src.reset_ledger()
    assert not src.ledger


@given(st.sets(st.sampled_from(["a", "b", "c", "d"])), st.sampled_from(["a", "b", "c", "d", "e"]), st.data())
def test_auth_monotonicity(valid, token, data):
    smaller = data.draw(st.sets(st.sampled_from(sorted(valid)))) if valid else set()

    def ok(tokens):
        try:
            DataSource(DataSourceConfig(valid_tokens=tokens)).fetch_cluster(REMOTE, 0, 0, token.encode())
            return True
        except AuthError:
            return False

    if ok(smaller):
        assert ok(valid)


@pytest.fixture(params=["memory", "dir"])
def store(request, tmp_path):
    return MemoryObjectStore() if request.param == "memory" else DirObjectStore(tmp_path / "s")


def test_store_semantics(store):
    store.put("results/r/0-1", b"abc")
    assert store.get("results/r/0-1") == b"abc"
    assert store.exists("results/r/0-1") and not store.exists("results/r/0-2")
    with pytest.raises(KeyExists):
        store.put("results/r/0-1", b"zzz")
    assert store.get("results/r/0-1") == b"abc"
    with pytest.raises(KeyNotFound):
        store.get("nope")
    store.put("results/r/1-1", b"")
    assert store.keys("results/") == ["results/r/0-1", "results/r/1-1"]


def test_concurrent_put_has_one_winner(store):
    wins, errors = [], []

    def put(i):
        try:
            store.put("k/x", bytes([i]) * 1000)
            wins.append(i)
        except KeyExists:
            errors.append(i)

    threads = [threading.Thread(target=put, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(wins) == 1 and len(errors) == 15
    assert store.get("k/x") == bytes([wins[0]]) * 1000


def test_dir_store_rejects_escaping_keys(tmp_path):
    s = DirObjectStore(tmp_path)
    for bad in ("../x", "a//b", "", "a/./b"):
        with pytest.raises(StoreError):
            s.put(bad, b"")


def test_staged_store_commit_and_discard():
    backing = MemoryObjectStore()
    s = StagedStore(backing)
    s.put("a", b"1")
    assert s.get("a") == b"1" and not backing.exists("a")
    s.discard()
    assert not s.exists("a")
    s.put("a", b"2")
    s.commit()
    assert backing.get("a") == b"2"


def test_result_key_layout():
    assert result_key("run7", 12, 3) == "results/run7/12-3"
