import numpy as np
import pytest
from hypothesis import given, strategies as st

from casil.types import (ArgumentError, CognitivePrior, RunConfig, SegmentedTrajectory,
                         TaskGoal, Trajectory, derive_durations, derive_step_options,
                         validate_dataset)


def make_traj(T=6, obs_dim=3, action_dim=2, seed=0, goal="reach the target"):
    rng = np.random.default_rng(seed)
    return Trajectory(TaskGoal(goal), rng.normal(size=(T, obs_dim)),
                      rng.normal(size=(T, action_dim)))


def test_goal_requires_text():
    with pytest.raises(ArgumentError):
        TaskGoal("")


def test_prior_validation():
    with pytest.raises(ArgumentError):
        CognitivePrior(())
    with pytest.raises(ArgumentError):
        CognitivePrior(("ok", ""))
    assert len(CognitivePrior(("a", "b"))) == 2


def test_trajectory_shape_checks():
    with pytest.raises(ArgumentError):
        Trajectory(TaskGoal("g"), np.zeros((3, 2)), np.zeros((4, 1)))
    with pytest.raises(ArgumentError):
        Trajectory(TaskGoal("g"), np.zeros((0, 2)), np.zeros((0, 1)))
    traj = make_traj()
    assert traj.length == 6 and traj.obs_dim == 3 and traj.action_dim == 2
    with pytest.raises(ValueError):
        traj.observations[0, 0] = 1.0  # immutable


def test_segmented_trajectory_invariants():
    traj = make_traj(T=10)
    seg = SegmentedTrajectory.from_boundaries(traj, (3, 7, 10))
    assert seg.durations == (3, 4, 3)
    assert sum(seg.durations) == traj.length
    np.testing.assert_array_equal(seg.per_step_option,
                                  [1, 1, 1, 2, 2, 2, 2, 3, 3, 3])
    with pytest.raises(ArgumentError):
        SegmentedTrajectory.from_boundaries(traj, (3, 3, 10))
    with pytest.raises(ArgumentError):
        SegmentedTrajectory.from_boundaries(traj, (3, 7, 9))  # b_K != T
    with pytest.raises(ArgumentError):
        SegmentedTrajectory.from_boundaries(traj, (0, 7, 10))


def test_per_step_option_rederivation_idempotent():
    traj = make_traj(T=10)
    seg = SegmentedTrajectory.from_boundaries(traj, (1, 2, 10))
    again = derive_step_options(seg.boundaries, traj.length)
    np.testing.assert_array_equal(seg.per_step_option, again)


@given(st.data())
def test_duration_properties_random_boundaries(data):
    T = data.draw(st.integers(1, 40))
    K = data.draw(st.integers(1, min(T, 6)))
    mids = sorted(data.draw(st.sets(st.integers(1, T - 1) if T > 1 else st.nothing(),
                                    min_size=K - 1, max_size=K - 1))) if K > 1 else []
    bs = tuple(mids) + (T,)
    H = derive_durations(bs)
    assert sum(H) == T
    assert all(h >= 1 for h in H)
    labels = derive_step_options(bs, T)
    assert labels[0] == 1 and labels[-1] == len(bs)
    assert np.all(np.diff(labels) >= 0)
    assert set(labels.tolist()) == set(range(1, len(bs) + 1))


def test_validate_dataset_examples():
    prior = CognitivePrior(tuple(f"skill {i}" for i in range(4)))
    good = [make_traj(T=10, seed=i) for i in range(10)]
    assert validate_dataset(good, prior) == []

    short = make_traj(T=2)
    report = validate_dataset([short], prior)
    assert len(report) == 1 and "T < K" in report[0] and "4 monotone" in report[0]

    obs = np.zeros((5, 3))
    obs[3, 1] = np.nan
    bad = Trajectory(TaskGoal("g"), obs, np.zeros((5, 2)))
    report = validate_dataset([bad], prior)
    assert any("non-finite observation at step 3" in r for r in report)

    mixed = [make_traj(obs_dim=3), make_traj(obs_dim=5)]
    report = validate_dataset(mixed, prior)
    assert any("obs_dim" in r for r in report)


def test_runconfig_validation():
    cfg = RunConfig()
    assert cfg.batch_size == 180 and cfg.truncation_len == 30
    assert cfg.lr_start == 1e-4 and cfg.lr_peak == 5e-4
    with pytest.raises(ArgumentError):
        RunConfig(embedding_dim=0)
    with pytest.raises(ArgumentError):
        RunConfig(epsilon=-0.1)
    with pytest.raises(ArgumentError):
        RunConfig(embedding_dim=30, attention_heads=4)
    assert RunConfig().with_overrides(seed=9).seed == 9
