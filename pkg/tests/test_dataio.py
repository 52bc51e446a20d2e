import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casil.dataio import (DatasetFormatError, DatasetManifest, VersionError,
                          deserialize_dataset, load_boundaries, save_boundaries,
                          serialize_dataset)
from casil.types import CognitivePrior, TaskGoal, Trajectory

PRIOR = CognitivePrior(("find the object", "carry it home"))


def manifest(n, obs_dim=3, action_dim=2):
    return DatasetManifest(task="toy", goal_text="carry the object home", prior=PRIOR.descriptions,
                           obs_dim=obs_dim, action_dim=action_dim, action_space="continuous",
                           trajectory_count=n)


def make_traj(T, seed=0):
    rng = np.random.default_rng(seed)
    return Trajectory(TaskGoal("carry the object home"),
                      rng.normal(size=(T, 3)), rng.normal(size=(T, 2)))


def test_empty_dataset_roundtrip():
    data = serialize_dataset([], PRIOR, manifest(0))
    trajs, prior, mani = deserialize_dataset(data)
    assert trajs == [] and prior == PRIOR and mani == manifest(0)


def test_roundtrip_exact_floats():
    trajs = [make_traj(5, seed=3)]
    data = serialize_dataset(trajs, PRIOR, manifest(1))
    back, prior, mani = deserialize_dataset(data)
    assert len(back) == 1
    np.testing.assert_array_equal(back[0].observations, trajs[0].observations)
    np.testing.assert_array_equal(back[0].actions, trajs[0].actions)
    assert back[0] == trajs[0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_roundtrip_property(seed, T):
    trajs = [make_traj(T, seed=seed)]
    data = serialize_dataset(trajs, PRIOR, manifest(1))
    back, _, _ = deserialize_dataset(data)
    assert back[0] == trajs[0]


def test_truncated_stream_is_an_error():
    data = serialize_dataset([make_traj(4)], PRIOR, manifest(1))
    with pytest.raises(DatasetFormatError):
        deserialize_dataset(data[:-10])


def test_corrupted_byte_is_an_error():
    data = bytearray(serialize_dataset([make_traj(4)], PRIOR, manifest(1)))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(DatasetFormatError):
        deserialize_dataset(bytes(data))


def test_version_mismatch_is_explicit():
    import json
    data = serialize_dataset([], PRIOR, manifest(0))
    lines = data.split(b"\n")
    head = json.loads(lines[0])
    head["format_version"] = 99
    body = json.dumps(head).encode() + b"\n"
    import hashlib
    trailer = json.dumps({"record_count": 0,
                          "sha256": hashlib.sha256(body).hexdigest()}).encode() + b"\n"
    with pytest.raises(VersionError):
        deserialize_dataset(body + trailer)


def test_parse_error_reports_offset():
    data = serialize_dataset([], PRIOR, manifest(0))
    err = None
    try:
        deserialize_dataset(b"not json\n" + data.split(b"\n", 1)[1])
    except DatasetFormatError as exc:
        err = exc
    assert err is not None


def test_embedding_cache_roundtrips():
    goal = TaskGoal("carry the object home", np.array([0.25, -1.5]))
    traj = Trajectory(goal, np.zeros((2, 3)), np.zeros((2, 2)))
    data = serialize_dataset([traj], PRIOR, manifest(1))
    back, _, _ = deserialize_dataset(data)
    np.testing.assert_array_equal(back[0].goal.embedding_cache, [0.25, -1.5])


def test_boundary_sidecar_roundtrip(tmp_path):
    path = tmp_path / "bounds.jsonl"
    save_boundaries(path, [(3, 7, 10), (5, 9, 12)])
    assert load_boundaries(path) == [(3, 7, 10), (5, 9, 12)]
