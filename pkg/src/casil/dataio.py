"""Dataset and sidecar serialization.

The dataset format is line-delimited JSON: a manifest record, one record per
trajectory, and a trailer carrying the record count plus a sha256 over all
preceding bytes so truncation is detected rather than silently accepted.
Floats are written at full round-trip precision.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .types import CasilError, CognitivePrior, TaskGoal, Trajectory

FORMAT_VERSION = 1


class DatasetFormatError(CasilError):
    """Malformed dataset stream; byte_offset locates the failure."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (at byte {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class VersionError(DatasetFormatError):
    pass


@dataclass(frozen=True)
class DatasetManifest:
    task: str
    goal_text: str
    prior: tuple[str, ...]
    obs_dim: int
    action_dim: int
    action_space: str  # "continuous" | "discrete"
    trajectory_count: int
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "prior", tuple(self.prior))
        if self.action_space not in ("continuous", "discrete"):
            raise DatasetFormatError(f"unknown action_space {self.action_space!r}")


def _goal_record(goal: TaskGoal) -> dict:
    cache = None if goal.embedding_cache is None else goal.embedding_cache.tolist()
    return {"text": goal.text, "embedding_cache": cache}


def _goal_from_record(rec: dict) -> TaskGoal:
    cache = rec.get("embedding_cache")
    return TaskGoal(rec["text"], None if cache is None else np.asarray(cache, dtype=np.float64))


def serialize_dataset(trajectories: list[Trajectory], prior: CognitivePrior,
                      manifest: DatasetManifest) -> bytes:
    if manifest.trajectory_count != len(trajectories):
        raise DatasetFormatError("manifest trajectory_count does not match the trajectory list")
    lines = [json.dumps(asdict(manifest))]
    for traj in trajectories:
        lines.append(json.dumps({
            "goal": _goal_record(traj.goal),
            "observations": traj.observations.tolist(),
            "actions": traj.actions.tolist(),
        }))
    body = ("\n".join(lines) + "\n").encode("utf-8")
    trailer = json.dumps({
        "record_count": len(trajectories),
        "sha256": hashlib.sha256(body).hexdigest(),
    }).encode("utf-8") + b"\n"
    return body + trailer


def deserialize_dataset(data: bytes) -> tuple[list[Trajectory], CognitivePrior, DatasetManifest]:
    if not data.endswith(b"\n"):
        raise DatasetFormatError("stream does not end in a newline; truncated?", len(data))
    raw_lines = data.split(b"\n")[:-1]
    if len(raw_lines) < 2:
        raise DatasetFormatError("stream too short for manifest and trailer", 0)

    offsets = []
    pos = 0
    for line in raw_lines:
        offsets.append(pos)
        pos += len(line) + 1

    def parse(i: int) -> dict:
        try:
            rec = json.loads(raw_lines[i].decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise DatasetFormatError(f"unparseable record: {exc}", offsets[i]) from None
        if not isinstance(rec, dict):
            raise DatasetFormatError("record is not an object", offsets[i])
        return rec

    trailer = parse(len(raw_lines) - 1)
    if set(trailer) != {"record_count", "sha256"}:
        raise DatasetFormatError("missing or malformed trailer; truncated stream?",
                                 offsets[-1])
    body = data[:offsets[-1]]
    digest = hashlib.sha256(body).hexdigest()
    if digest != trailer["sha256"]:
        raise DatasetFormatError("checksum mismatch; stream corrupted or truncated", offsets[-1])

    head = parse(0)
    version = head.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version!r}, expected {FORMAT_VERSION}",
                           offsets[0])
    try:
        manifest = DatasetManifest(
            task=head["task"], goal_text=head["goal_text"], prior=tuple(head["prior"]),
            obs_dim=int(head["obs_dim"]), action_dim=int(head["action_dim"]),
            action_space=head["action_space"], trajectory_count=int(head["trajectory_count"]))
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"bad manifest: {exc}", offsets[0]) from None

    records = raw_lines[1:-1]
    if len(records) != trailer["record_count"] or len(records) != manifest.trajectory_count:
        raise DatasetFormatError(
            f"expected {manifest.trajectory_count} trajectory records, found {len(records)}",
            offsets[-1])

    trajectories = []
    for i in range(1, len(raw_lines) - 1):
        rec = parse(i)
        try:
            traj = Trajectory(
                goal=_goal_from_record(rec["goal"]),
                observations=np.asarray(rec["observations"], dtype=np.float64),
                actions=np.asarray(rec["actions"], dtype=np.float64))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"bad trajectory record: {exc}", offsets[i]) from None
        if traj.obs_dim != manifest.obs_dim or traj.action_dim != manifest.action_dim:
            raise DatasetFormatError("trajectory dimensions disagree with manifest", offsets[i])
        trajectories.append(traj)
    return trajectories, CognitivePrior(manifest.prior), manifest


def save_dataset(path, trajectories, prior, manifest) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_dataset(trajectories, prior, manifest))


def load_dataset(path) -> tuple[list[Trajectory], CognitivePrior, DatasetManifest]:
    with open(path, "rb") as fh:
        return deserialize_dataset(fh.read())


def save_boundaries(path, boundaries: list[tuple[int, ...]]) -> None:
    """Ground-truth boundary sidecar: one record per trajectory index."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, bs in enumerate(boundaries):
            fh.write(json.dumps({"trajectory": i, "boundaries": list(map(int, bs))}) + "\n")


def load_boundaries(path) -> list[tuple[int, ...]]:
    out: dict[int, tuple[int, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out[int(rec["trajectory"])] = tuple(int(b) for b in rec["boundaries"])
    return [out[i] for i in sorted(out)]
