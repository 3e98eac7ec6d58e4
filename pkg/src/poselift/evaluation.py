"""Evaluation driver: slide over every frame, optionally flip-ensemble,
aggregate metrics per action."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .checkpoint import load_checkpoint
from .data import SequenceRecord, flip_pose, hflip, window
from .errors import ConfigError
from .metrics import (DEFAULT_PCK_THRESHOLD, EvalReport, auc, mpjpe, p_mpjpe, pck)
from .model import ModelConfig, Params, predict


def evaluate(predict_fn: Callable[[np.ndarray], np.ndarray], records: list[SequenceRecord],
             frames: int, flip_ensemble: bool = True, with_scale: bool = True,
             pck_threshold: float = DEFAULT_PCK_THRESHOLD, auc_thresholds=None) -> EvalReport:
    """Score a predictor over every center frame of every record.

    ``predict_fn`` maps a (frames, J, 2) window to a (J, 3) pose; injecting a
    different callable (e.g. a ground-truth oracle) exercises the metric
    plumbing without a model.  With ``flip_ensemble`` the prediction is the
    pose-space average of the plain output and the un-flipped output on the
    mirrored window.
    """
    report = EvalReport()
    for rec in records:
        for center in range(rec.length):
            win = window(rec, frames, center)
            pred = np.asarray(predict_fn(win.joints_2d), dtype=np.float64)
            if flip_ensemble:
                flipped = hflip(win)
                pred_f = np.asarray(predict_fn(flipped.joints_2d), dtype=np.float64)
                pred = 0.5 * (pred + flip_pose(pred_f, win.skeleton))
            report.add(win.action, {
                "mpjpe": mpjpe(pred, win.target),
                "p_mpjpe": p_mpjpe(pred, win.target, with_scale=with_scale),
                "pck150": pck(pred, win.target, pck_threshold),
                "auc": auc(pred, win.target, auc_thresholds),
            })
    return report


def evaluate_params(params: Params, config: ModelConfig, records: list[SequenceRecord],
                    flip_ensemble: bool = True, **kwargs) -> EvalReport:
    if any(r.skeleton.num_joints != config.num_joints for r in records):
        raise ConfigError(f"dataset joint count does not match model num_joints={config.num_joints}")
    return evaluate(lambda win: predict(win, params, config), records,
                    frames=config.frames, flip_ensemble=flip_ensemble, **kwargs)


def evaluate_checkpoint(path, records: list[SequenceRecord], flip_ensemble: bool = True,
                        **kwargs) -> EvalReport:
    """Load a checkpoint and evaluate it; joint-count mismatches are config errors."""
    params, config, _ = load_checkpoint(path)
    return evaluate_params(params, config, records, flip_ensemble=flip_ensemble, **kwargs)
