"""Evaluation metrics for 3D pose estimates (millimeter scale).

All functions take (J, 3) prediction/ground-truth arrays.  PCK and AUC are
fractions in [0, 1]; thresholds are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ShapeError

DEFAULT_PCK_THRESHOLD = 150.0
DEFAULT_AUC_THRESHOLDS = np.arange(0.0, 151.0, 5.0)  # 0, 5, ..., 150


def _check_pair(pred, gt, op: str) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] != 3:
        raise ShapeError(f"{op} expects (J, 3) poses, got {pred.shape}")
    if pred.shape != gt.shape:
        raise ShapeError(f"{op}: prediction {pred.shape} and ground truth {gt.shape} disagree")
    return pred, gt


def mpjpe(pred, gt) -> float:
    """Mean per-joint position error: average Euclidean distance in mm."""
    pred, gt = _check_pair(pred, gt, "mpjpe")
    return float(np.linalg.norm(pred - gt, axis=1).mean())


def procrustes_align(pred, gt, with_scale: bool = True) -> np.ndarray:
    """Optimal similarity alignment of ``pred`` onto ``gt`` (least squares).

    Returns the aligned copy of ``pred``.  The rotation is proper
    (determinant +1); set ``with_scale=False`` for a rigid alignment.
    Degenerate inputs (fewer than 3 joints, a collapsed prediction, or a
    rank-0 cross-covariance) raise :class:`AlignmentError`.
    """
    pred, gt = _check_pair(pred, gt, "procrustes_align")
    J = pred.shape[0]
    if J < 3:
        raise AlignmentError(f"alignment needs at least 3 joints, got {J}")

    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    x = pred - mu_p
    y = gt - mu_g
    norm_x = (x * x).sum()
    if norm_x == 0.0:
        raise AlignmentError("prediction joints are coincident; alignment undefined")

    cov = x.T @ y  # 3x3
    u, s, vt = np.linalg.svd(cov)
    if s.max() == 0.0:
        raise AlignmentError("cross-covariance is rank 0; alignment undefined")
    d = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    flip = np.ones(3)
    flip[-1] = d if d != 0 else 1.0
    rot = (u * flip) @ vt  # applied as x @ rot
    scale = float((s * flip).sum() / norm_x) if with_scale else 1.0
    return scale * (x @ rot) + mu_g


def p_mpjpe(pred, gt, with_scale: bool = True) -> float:
    """MPJPE after Procrustes alignment of the prediction onto the ground truth."""
    return mpjpe(procrustes_align(pred, gt, with_scale=with_scale), gt)


def pck(pred, gt, threshold: float = DEFAULT_PCK_THRESHOLD) -> float:
    """Fraction of joints within ``threshold`` mm (inclusive)."""
    pred, gt = _check_pair(pred, gt, "pck")
    dists = np.linalg.norm(pred - gt, axis=1)
    return float((dists <= threshold).mean())


def auc(pred, gt, thresholds=None) -> float:
    """Mean PCK over a threshold grid (default 0..150 mm in steps of 5)."""
    grid = DEFAULT_AUC_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ShapeError("auc thresholds must be a non-empty 1-D grid")
    return float(np.mean([pck(pred, gt, t) for t in grid]))


# ------------------------------------------------------------------ reporting


_COLUMNS = ("mpjpe", "p_mpjpe", "pck150", "auc")


@dataclass
class EvalReport:
    """Per-action metric means plus a count-weighted overall row."""

    actions: dict[str, dict[str, float]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def add(self, action: str, metrics: dict[str, float]) -> None:
        """Fold one window's metrics into the running per-action means."""
        n = self.counts.get(action, 0)
        row = self.actions.setdefault(action, {c: 0.0 for c in _COLUMNS})
        for c in _COLUMNS:
            row[c] = (row[c] * n + metrics[c]) / (n + 1)
        self.counts[action] = n + 1

    def aggregate(self) -> dict[str, float]:
        total = sum(self.counts.values())
        if total == 0:
            return {c: float("nan") for c in _COLUMNS}
        agg = {}
        for c in _COLUMNS:
            agg[c] = sum(self.actions[a][c] * n for a, n in self.counts.items()) / total
        return agg

    @property
    def total_windows(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> dict:
        return {
            "per_action": {a: {**self.actions[a], "count": self.counts[a]} for a in sorted(self.actions)},
            "all": {**self.aggregate(), "count": self.total_windows},
        }

    def to_csv(self) -> str:
        lines = ["action,count,mpjpe,p_mpjpe,pck150,auc"]
        rows = [(a, self.counts[a], self.actions[a]) for a in sorted(self.actions)]
        rows.append(("all", self.total_windows, self.aggregate()))
        for action, count, m in rows:
            lines.append(f"{action},{count},{m['mpjpe']:.6f},{m['p_mpjpe']:.6f},{m['pck150']:.6f},{m['auc']:.6f}")
        return "\n".join(lines) + "\n"
