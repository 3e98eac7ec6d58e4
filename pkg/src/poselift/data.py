"""Pose sequence records, synthetic motion generation and window extraction.

Datasets are JSON-lines files, one sequence per line.  2D inputs live in
normalized image coordinates in [-1, 1]; 3D targets are millimeters,
root-relative (the root joint sits exactly at the origin in every frame).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

SCHEMA_VERSION = 1

# Synthetic camera: pinhole at `depth` mm looking along z, focal in pixels,
# image coordinates normalized by half_width into [-1, 1].
CAMERA = {"focal": 1000.0, "depth": 4000.0, "half_width": 500.0}


@dataclass
class SkeletonSpec:
    """Joint-graph metadata: tree structure plus left/right mirror pairs."""

    num_joints: int
    root: int
    parents: list[int]
    mirror_pairs: list[tuple[int, int]]

    def validate(self) -> "SkeletonSpec":
        J = self.num_joints
        if J < 1:
            raise ConfigError(f"num_joints must be >= 1, got {J}")
        if not 0 <= self.root < J:
            raise ConfigError(f"root index {self.root} out of range for {J} joints")
        if len(self.parents) != J:
            raise ConfigError(f"parents must list {J} entries, got {len(self.parents)}")
        if self.parents[self.root] != -1:
            raise ConfigError("the root joint's parent must be -1")
        for j, p in enumerate(self.parents):
            if j != self.root and not 0 <= p < J:
                raise ConfigError(f"joint {j} has invalid parent {p}")
        seen: set[int] = set()
        for l, r in self.mirror_pairs:
            if not (0 <= l < J and 0 <= r < J) or l == r:
                raise ConfigError(f"invalid mirror pair ({l}, {r})")
            if self.root in (l, r):
                raise ConfigError("the root joint cannot be mirrored")
            if l in seen or r in seen:
                raise ConfigError(f"joint reused across mirror pairs: ({l}, {r})")
            seen.update((l, r))
        return self

    def mirror_permutation(self) -> np.ndarray:
        perm = np.arange(self.num_joints)
        for l, r in self.mirror_pairs:
            perm[l], perm[r] = r, l
        return perm

    def to_dict(self) -> dict:
        return {
            "num_joints": self.num_joints,
            "root": self.root,
            "parents": list(self.parents),
            "mirror_pairs": [list(p) for p in self.mirror_pairs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonSpec":
        return cls(
            num_joints=int(d["num_joints"]),
            root=int(d["root"]),
            parents=[int(p) for p in d["parents"]],
            mirror_pairs=[(int(a), int(b)) for a, b in d["mirror_pairs"]],
        ).validate()


def default_skeleton(num_joints: int = 17) -> SkeletonSpec:
    """A bilaterally symmetric toy skeleton: binary-tree bones, pairs (1,2), (3,4), ..."""
    parents = [-1] + [(j - 1) // 2 for j in range(1, num_joints)]
    pairs = [(j, j + 1) for j in range(1, num_joints - 1, 2)]
    return SkeletonSpec(num_joints=num_joints, root=0, parents=parents, mirror_pairs=pairs).validate()


def rest_pose(skeleton: SkeletonSpec) -> np.ndarray:
    """Deterministic (J, 3) rest pose in mm, symmetric across mirror pairs."""
    J = skeleton.num_joints
    rest = np.zeros((J, 3))
    for j in range(J):
        if j == skeleton.root:
            continue
        step = 90.0 + 10.0 * ((j * 7) % 5)  # bone lengths 90..130mm
        off = np.zeros(3)
        off[j % 3] = step if (j // 3) % 2 == 0 else -step
        rest[j] = rest[skeleton.parents[j]] + off
    for l, r in skeleton.mirror_pairs:
        rest[l, 0] = abs(rest[l, 0]) + 80.0  # keep pairs laterally separated
        rest[r] = rest[l] * np.array([-1.0, 1.0, 1.0])
    rest -= rest[skeleton.root]
    return rest


@dataclass
class SequenceRecord:
    """One motion sequence: 2D observations plus root-relative 3D targets."""

    record_id: str
    action: str
    skeleton: SkeletonSpec
    joints_2d: np.ndarray  # (T, J, 2) in [-1, 1]
    joints_3d: np.ndarray  # (T, J, 3) mm, root at origin
    camera: dict = field(default_factory=lambda: dict(CAMERA))

    @property
    def length(self) -> int:
        return self.joints_2d.shape[0]

    def validate(self) -> "SequenceRecord":
        self.skeleton.validate()
        J = self.skeleton.num_joints
        p2, p3 = self.joints_2d, self.joints_3d
        if p2.ndim != 3 or p2.shape[1:] != (J, 2):
            raise DataError(f"record {self.record_id!r}: joints_2d must be (T, {J}, 2), got {p2.shape}")
        if p3.shape != (p2.shape[0], J, 3):
            raise DataError(f"record {self.record_id!r}: joints_3d must be ({p2.shape[0]}, {J}, 3), got {p3.shape}")
        if p2.shape[0] < 1:
            raise DataError(f"record {self.record_id!r}: empty sequence")
        if not (np.isfinite(p2).all() and np.isfinite(p3).all()):
            raise DataError(f"record {self.record_id!r}: non-finite coordinates")
        if np.abs(p2).max() > 1.0 + 1e-9:
            raise DataError(f"record {self.record_id!r}: joints_2d outside [-1, 1]")
        if np.abs(p3[:, self.skeleton.root, :]).max() > 1e-6:
            raise DataError(f"record {self.record_id!r}: root joint is not at the origin")
        return self

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.record_id,
            "action": self.action,
            "skeleton": self.skeleton.to_dict(),
            "camera": dict(self.camera),
            "joints_2d": self.joints_2d.tolist(),
            "joints_3d": self.joints_3d.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceRecord":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DataError(f"unsupported schema_version {version!r}")
        try:
            rec = cls(
                record_id=str(d["id"]),
                action=str(d["action"]),
                skeleton=SkeletonSpec.from_dict(d["skeleton"]),
                joints_2d=np.asarray(d["joints_2d"], dtype=np.float64),
                joints_3d=np.asarray(d["joints_3d"], dtype=np.float64),
                camera=dict(d.get("camera", CAMERA)),
            )
        except KeyError as exc:
            raise DataError(f"missing record field {exc.args[0]!r}") from exc
        return rec.validate()


def save_records(path, records: list[SequenceRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def load_records(path) -> list[SequenceRecord]:
    """Parse a JSONL dataset; errors carry the file:line or record id."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                records.append(SequenceRecord.from_dict(payload))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return records


# ------------------------------------------------------------------ synthesis


def synth_sequence(skeleton: SkeletonSpec, seed, length: int, action: str = "walk",
                   amplitude: float = 200.0, record_id: str | None = None,
                   pose_scale: float = 1.0) -> SequenceRecord:
    """Seeded sinusoidal motion around the rest pose, projected to 2D.

    Each non-root joint follows three sinusoids whose phases and frequencies
    are shared across the x/y/z axes, with per-axis amplitudes summing to at
    most ``amplitude``/3 mm.  Sharing the basis makes depth co-vary with the
    observable axes, as articulated motion does.  The root never moves, so
    the 3D track is root-relative by construction.

    ``pose_scale`` re-expresses the scene in different units (3D track and
    camera distances scale together, so the projection is unchanged); e.g.
    0.001 turns millimetres into metres.
    """
    if length < 1:
        raise ConfigError(f"length must be >= 1, got {length}")
    if pose_scale <= 0:
        raise ConfigError(f"pose_scale must be positive, got {pose_scale}")
    rng = np.random.default_rng(seed)
    J = skeleton.num_joints
    base = rest_pose(skeleton)

    amps = rng.uniform(0.0, amplitude / 3.0, size=(J, 3, 3))  # (joint, axis, sinusoid)
    freqs = rng.uniform(0.5, 3.0, size=(J, 3))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(J, 3))
    t = np.arange(length) / max(length, 2)
    waves = np.sin(2.0 * np.pi * freqs * t[:, None, None] + phases)  # (T, J, sinusoid)
    wobble = np.einsum("jak,tjk->tja", amps, waves)
    pose3 = base[None, :, :] + wobble
    pose3[:, skeleton.root, :] = base[skeleton.root]

    denom = CAMERA["depth"] - pose3[..., 2]
    u = CAMERA["focal"] * pose3[..., 0] / denom
    v = CAMERA["focal"] * pose3[..., 1] / denom
    pose2 = np.stack([u, v], axis=-1)
    # normalize to a subject bounding box (as a keypoint cropper would):
    # the sequence's largest pixel coordinate maps to 0.8
    peak = np.abs(pose2).max()
    scale = 0.8 / peak if peak > 0 else 1.0
    pose2 *= scale

    rid = record_id if record_id is not None else f"synth-{action}-{seed}"
    camera = dict(CAMERA)
    camera["image_scale"] = scale
    camera["depth"] = CAMERA["depth"] * pose_scale
    camera["half_width"] = CAMERA["half_width"] * pose_scale
    return SequenceRecord(
        record_id=rid,
        action=action,
        skeleton=skeleton,
        joints_2d=pose2,
        joints_3d=(pose3 - pose3[:, skeleton.root:skeleton.root + 1, :]) * pose_scale,
        camera=camera,
    ).validate()


def make_dataset(skeleton: SkeletonSpec, seed: int, num_records: int, length: int,
                 actions: tuple[str, ...] = ("walk", "sit", "wave", "turn"),
                 amplitude: float = 200.0, pose_scale: float = 1.0) -> list[SequenceRecord]:
    """Deterministic multi-record dataset; records get independent child seeds."""
    children = np.random.SeedSequence(seed).spawn(num_records)
    return [
        synth_sequence(skeleton, child, length, action=actions[i % len(actions)],
                       amplitude=amplitude, record_id=f"synth-{i:04d}", pose_scale=pose_scale)
        for i, child in enumerate(children)
    ]


# ------------------------------------------------------------------ windows


@dataclass
class PoseWindow:
    """Model input/target pair: F frames of 2D and the center frame's 3D pose."""

    joints_2d: np.ndarray  # (F, J, 2)
    target: np.ndarray     # (J, 3)
    skeleton: SkeletonSpec
    record_id: str
    action: str
    center: int


def window(record: SequenceRecord, frames: int, center: int) -> PoseWindow:
    """Extract a window centered on a frame, replicating edge frames as needed."""
    if frames < 1 or frames % 2 == 0:
        raise ConfigError(f"frames must be odd and >= 1, got {frames}")
    T = record.length
    if not 0 <= center < T:
        raise DataError(f"record {record.record_id!r}: center {center} out of range for {T} frames")
    pad = frames // 2
    idx = np.clip(np.arange(center - pad, center + pad + 1), 0, T - 1)
    return PoseWindow(
        joints_2d=np.ascontiguousarray(record.joints_2d[idx]),
        target=np.array(record.joints_3d[center], copy=True),
        skeleton=record.skeleton,
        record_id=record.record_id,
        action=record.action,
        center=center,
    )


def flip_pose(pose: np.ndarray, skeleton: SkeletonSpec) -> np.ndarray:
    """Mirror a (J, 3) pose: negate x and swap left/right joints."""
    perm = skeleton.mirror_permutation()
    out = pose[perm] * np.array([-1.0, 1.0, 1.0])
    return out


def hflip(win: PoseWindow) -> PoseWindow:
    """Horizontally flip a window (inputs and target); applying twice is identity."""
    perm = win.skeleton.mirror_permutation()
    return PoseWindow(
        joints_2d=win.joints_2d[:, perm] * np.array([-1.0, 1.0]),
        target=flip_pose(win.target, win.skeleton),
        skeleton=win.skeleton,
        record_id=win.record_id,
        action=win.action,
        center=win.center,
    )
