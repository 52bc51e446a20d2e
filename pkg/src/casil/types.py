"""Shared value types: demonstrations, priors, options, segmentations, config.

Conventions: an observation is a 1-D float64 vector, an action likewise;
trajectories store them stacked as (T, dim) arrays. All values are immutable
after construction (arrays are set read-only) and safe to share across
concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Iterator

import numpy as np

# observations and actions are plain vectors
Observation = np.ndarray
Action = np.ndarray


class CasilError(Exception):
    """Base class for package errors."""


class ArgumentError(CasilError, ValueError):
    """A caller violated an operation's preconditions."""


class InfeasibleSegmentationError(CasilError):
    """Trajectory too short to place the requested monotone boundaries."""


class NumericError(CasilError):
    """A non-finite value appeared; message names the stage."""


def _frozen(a: np.ndarray, dtype=np.float64, ndim: int | None = None) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    if ndim is not None and out.ndim != ndim:
        raise ArgumentError(f"expected {ndim}-d array, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TaskGoal:
    text: str
    embedding_cache: np.ndarray | None = None

    def __post_init__(self):
        if not self.text:
            raise ArgumentError("goal text must be non-empty")
        if self.embedding_cache is not None:
            object.__setattr__(self, "embedding_cache", _frozen(self.embedding_cache, ndim=1))

    def __eq__(self, other):
        if not isinstance(other, TaskGoal):
            return NotImplemented
        if self.text != other.text:
            return False
        a, b = self.embedding_cache, other.embedding_cache
        if (a is None) != (b is None):
            return False
        return a is None or np.array_equal(a, b)


@dataclass(frozen=True)
class CognitivePrior:
    """Ordered textual skill descriptions l_1..l_K in intended execution order."""

    descriptions: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "descriptions", tuple(self.descriptions))
        if len(self.descriptions) < 1:
            raise ArgumentError("prior needs at least one description")
        if any(not d for d in self.descriptions):
            raise ArgumentError("prior descriptions must be non-empty")

    def __len__(self) -> int:
        return len(self.descriptions)


@dataclass(frozen=True)
class Trajectory:
    """One expert demonstration: goal plus T (observation, action) steps."""

    goal: TaskGoal
    observations: np.ndarray  # (T, obs_dim)
    actions: np.ndarray  # (T, action_dim)

    def __post_init__(self):
        object.__setattr__(self, "observations", _frozen(self.observations, ndim=2))
        object.__setattr__(self, "actions", _frozen(self.actions, ndim=2))
        if self.observations.shape[0] != self.actions.shape[0]:
            raise ArgumentError("observations and actions must have equal length")
        if self.observations.shape[0] < 1:
            raise ArgumentError("trajectory needs at least one step")

    @property
    def length(self) -> int:
        return self.observations.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.observations.shape[1]

    @property
    def action_dim(self) -> int:
        return self.actions.shape[1]

    @property
    def steps(self) -> Iterator[tuple[Observation, Action]]:
        return zip(self.observations, self.actions)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.goal == other.goal
                and np.array_equal(self.observations, other.observations)
                and np.array_equal(self.actions, other.actions))


@dataclass(frozen=True)
class Option:
    """A discrete skill code: 1-based index into the prior plus its embedding."""

    skill_index: int
    embedding: np.ndarray

    def __post_init__(self):
        if self.skill_index < 1:
            raise ArgumentError("skill_index is 1-based and must be >= 1")
        object.__setattr__(self, "embedding", _frozen(self.embedding, ndim=1))


def derive_step_options(boundaries: tuple[int, ...], length: int) -> np.ndarray:
    """Per-step 1-based skill labels from end boundaries b_1 < ... < b_K = T."""
    labels = np.zeros(length, dtype=np.int64)
    start = 0
    for k, b in enumerate(boundaries, start=1):
        labels[start:b] = k
        start = b
    return labels


def derive_durations(boundaries: tuple[int, ...]) -> tuple[int, ...]:
    """H(t) = b_t - b_{t-1} with b_0 = 0."""
    prev = 0
    out = []
    for b in boundaries:
        out.append(b - prev)
        prev = b
    return tuple(out)


@dataclass(frozen=True)
class SegmentedTrajectory:
    """A trajectory with its monotone skill boundaries: the SMDP view.

    Boundary b_k is the 1-based index of the *last* step of skill k, so skill k
    covers steps b_{k-1}+1 .. b_k and b_K = T always.
    """

    base: Trajectory
    boundaries: tuple[int, ...]
    durations: tuple[int, ...]
    per_step_option: np.ndarray

    def __post_init__(self):
        bs = tuple(int(b) for b in self.boundaries)
        object.__setattr__(self, "boundaries", bs)
        object.__setattr__(self, "durations", tuple(int(h) for h in self.durations))
        object.__setattr__(self, "per_step_option",
                           _frozen(self.per_step_option, dtype=np.int64, ndim=1))
        T = self.base.length
        if any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])):
            raise ArgumentError(f"boundaries must strictly increase, got {bs}")
        if bs[0] < 1 or bs[-1] != T:
            raise ArgumentError(f"boundaries must lie in [1, T] with b_K = T, got {bs}")
        if self.durations != derive_durations(bs):
            raise ArgumentError("durations inconsistent with boundaries")
        if sum(self.durations) != T:
            raise ArgumentError("durations must sum to T")
        if not np.array_equal(self.per_step_option, derive_step_options(bs, T)):
            raise ArgumentError("per_step_option inconsistent with boundaries")

    @classmethod
    def from_boundaries(cls, base: Trajectory, boundaries) -> "SegmentedTrajectory":
        bs = tuple(int(b) for b in boundaries)
        return cls(base, bs, derive_durations(bs), derive_step_options(bs, base.length))

    @property
    def skill_count(self) -> int:
        return len(self.boundaries)


@dataclass(frozen=True)
class RunConfig:
    """Hyperparameters for one training run."""

    seed: int = 0
    # model widths (desk-scale stand-ins for the full-size architecture)
    embedding_dim: int = 32
    skill_embedding_dim: int = 32
    memory_dim: int = 32
    encoder_hidden: int = 32
    attention_heads: int = 4
    transformer_layers: int = 2
    ff_dim: int = 64
    hash_buckets: int = 128
    # loss weights
    epsilon: float = 1.0  # cognition-generation loss coefficient
    term_weight: float = 1.0
    # optimizer schedule: linear warm-up then a one-time decay
    lr_start: float = 1e-4
    lr_peak: float = 5e-4
    warmup_steps: int = 10
    decay_step: int = 150
    decay_factor: float = 0.5
    grad_clip: float = 1.0
    batch_size: int = 180
    train_steps: int = 300
    truncation_len: int = 30
    dropout: float = 0.0
    # option control
    skill_count: int | None = None  # None: take K from the prior
    max_skill_horizon: int = 80

    def __post_init__(self):
        positive = ("embedding_dim", "skill_embedding_dim", "memory_dim", "encoder_hidden",
                    "attention_heads", "transformer_layers", "ff_dim", "hash_buckets",
                    "lr_start", "lr_peak", "warmup_steps", "batch_size", "train_steps",
                    "truncation_len", "max_skill_horizon", "grad_clip", "decay_factor")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ArgumentError(f"{name} must be positive")
        if self.epsilon < 0 or self.term_weight < 0:
            raise ArgumentError("loss coefficients must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError("dropout must be in [0, 1)")
        if self.embedding_dim % self.attention_heads != 0:
            raise ArgumentError("attention_heads must divide embedding_dim")
        if self.skill_count is not None and self.skill_count < 1:
            raise ArgumentError("skill_count must be >= 1 when set")

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def validate_dataset(trajectories: list[Trajectory], prior: CognitivePrior) -> list[str]:
    """Per-trajectory violation report; the dataset is valid iff it is empty."""
    report: list[str] = []
    K = len(prior)
    ref_obs = ref_act = None
    for i, traj in enumerate(trajectories):
        T = traj.length
        if ref_obs is None:
            ref_obs, ref_act = traj.obs_dim, traj.action_dim
        if traj.obs_dim != ref_obs:
            report.append(f"trajectory {i}: obs_dim {traj.obs_dim} != dataset obs_dim {ref_obs}")
        if traj.action_dim != ref_act:
            report.append(
                f"trajectory {i}: action_dim {traj.action_dim} != dataset action_dim {ref_act}")
        if T < K:
            report.append(
                f"trajectory {i}: T < K: cannot place {K} monotone boundaries in {T} steps")
        bad_obs = np.flatnonzero(~np.isfinite(traj.observations).all(axis=1))
        if bad_obs.size:
            report.append(f"trajectory {i}: non-finite observation at step {int(bad_obs[0])}")
        bad_act = np.flatnonzero(~np.isfinite(traj.actions).all(axis=1))
        if bad_act.size:
            report.append(f"trajectory {i}: non-finite action at step {int(bad_act[0])}")
    return report
