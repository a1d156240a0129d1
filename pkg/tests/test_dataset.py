import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lambdaframe.dataset import (
    ClusterInfo, DatasetDescriptor, DuplicateColumn, EmptyDataset, FileDescriptor, NonContiguousClusters,
    ValidationError, dump_manifest, layout_from_spans, load_manifest, synth_block, synth_value,
    total_entries, uniform_layout, validate,
)

from oracles import value


@given(st.integers(0, 2**32), st.integers(0, 5), st.integers(0, 2**40))
def test_values_match_reference_generator(seed, col, entry):
    assert synth_value(seed, col, entry) == value(seed, col, entry)


def test_block_is_position_independent():
    whole = synth_block(3, 1, 0, 1000)
    pieces = np.concatenate([synth_block(3, 1, a, a + 100) for a in range(0, 1000, 100)])
    assert np.array_equal(whole, pieces)


def test_values_in_unit_interval_and_columns_differ():
    a = synth_block(0, 0, 0, 10000)
    b = synth_block(0, 1, 0, 10000)
    assert a.min() >= 0.0 and a.max() < 1.0
    assert not np.array_equal(a, b)
    assert abs(a.mean() - 0.5) < 0.01


def test_uniform_layout_shape():
    d = uniform_layout("u", 3, 4, 10, 100, ("x", "y"))
    assert total_entries(d) == 120
    assert len(d.cluster_refs()) == 12
    assert list(d.file_offsets()) == [0, 40, 80]
    begins = [g for _, _, g, _, _ in d.global_clusters()]
    assert begins == list(range(0, 120, 10))


def test_manifest_round_trip(tmp_path):
    d = uniform_layout("u", 2, 3, 5, 64, ("a",), seed=9, kind="simulated_remote", requires_token=True)
    path = tmp_path / "m.json"
    dump_manifest(d, path)
    assert load_manifest(path) == d
    assert DatasetDescriptor.from_manifest(json.loads(path.read_text())) == d


def test_manifest_rejects_unknown_version():
    doc = uniform_layout("u", 1, 1, 5, 64, ("a",)).to_manifest()
    doc["manifest_version"] = 99
    with pytest.raises(ValidationError):
        DatasetDescriptor.from_manifest(doc)


def test_validate_errors():
    with pytest.raises(EmptyDataset):
        validate(DatasetDescriptor("e", (), ("a",)))
    with pytest.raises(DuplicateColumn) as ei:
        validate(layout_from_spans("d", [[5]], columns=("a", "a")))
    assert ei.value.name == "a"
    gap = FileDescriptor("f", (ClusterInfo(0, 5, 1), ClusterInfo(6, 9, 1)))
    with pytest.raises(NonContiguousClusters) as ei:
        validate(DatasetDescriptor("g", (gap,), ("a",)))
    assert (ei.value.file, ei.value.index) == (0, 1)
    with pytest.raises(ValidationError):
        validate(DatasetDescriptor("k", (FileDescriptor("f", (ClusterInfo(0, 5, 1),)),), ("a",), kind="nope"))
