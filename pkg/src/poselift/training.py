"""Training loop: MPJPE objective, Adam with exponential LR decay, flip
augmentation, JSONL epoch logs and per-epoch checkpoints.

Runs are bitwise deterministic for a fixed config: parameter init, batch
shuffling and flip decisions each draw from independent child streams of the
run seed.
"""

from __future__ import annotations

import dataclasses
import functools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ops
from .autograd import Tensor, backward
from .checkpoint import save_checkpoint
from .data import PoseWindow, hflip, load_records, window
from .errors import ConfigError, NumericError, TrainingError
from .evaluation import evaluate_params
from .model import ModelConfig, Params, forward, init_params
from .ops import mean_row_norms, sub

LOG_NAME = "train_log.jsonl"
CHECKPOINT_NAME = "checkpoint.ckpt"


@dataclass
class TrainConfig:
    model: ModelConfig
    dataset: str
    out_dir: str
    epochs: int = 100
    batch_size: int = 32          # 512 reproduces the full-scale recipe
    lr0: float = 1e-4
    lr_decay: float = 0.99
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    flip_augment: bool = True
    eval_flip_ensemble: bool = True
    holdout_fraction: float = 0.2
    eval_dataset: str | None = None
    max_steps: int | None = None

    def validate(self) -> "TrainConfig":
        self.model.validate()
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError(f"holdout_fraction must be in [0, 1), got {self.holdout_fraction}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        model = d.pop("model", None)
        if model is None:
            raise ConfigError("train config needs a 'model' section")
        return cls(model=ModelConfig.from_dict(model), **d).validate()


# ------------------------------------------------------------------ optimizer


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: Params) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t.data) for k, t in params.items()},
            v={k: np.zeros_like(t.data) for k, t in params.items()},
        )


def adam_step(params: Params, grads: dict[str, np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place."""
    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in slot {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    state.step = t


def lr_at(epoch: int, lr0: float, decay: float = 0.99) -> float:
    """Exponentially decayed learning rate for a given 0-based epoch."""
    return lr0 * decay ** epoch


# ------------------------------------------------------------------ objective


def mpjpe_loss(pred: Tensor, target) -> Tensor:
    """Differentiable mean per-joint position error (zero subgradient at zero)."""
    target = target if isinstance(target, Tensor) else Tensor(target)
    return mean_row_norms(sub(pred, target))


# ------------------------------------------------------------------ the loop


@dataclass
class TrainResult:
    params: Params
    config: TrainConfig
    log: list[dict]
    checkpoint_path: str
    steps: int
    epochs_run: int


def split_records(records: list, fraction: float) -> tuple[list, list]:
    """Deterministic split: the last ``fraction`` of records by id become holdout."""
    ordered = sorted(records, key=lambda r: r.record_id)
    n_hold = int(len(ordered) * fraction)
    if n_hold == 0:
        return ordered, []
    return ordered[:-n_hold], ordered[-n_hold:]


def _all_windows(records: list, frames: int) -> list[PoseWindow]:
    return [window(rec, frames, c) for rec in records for c in range(rec.length)]


def train(config: TrainConfig) -> TrainResult:
    """Train from scratch; returns the final params and the epoch log.

    A checkpoint and a log line are written every epoch.  Non-finite losses
    or gradients abort with :class:`TrainingError`; the checkpoint of the
    last completed epoch stays on disk.
    """
    config.validate()
    mc = config.model
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / CHECKPOINT_NAME
    log_path = out_dir / LOG_NAME

    records = load_records(config.dataset)
    if not records:
        raise ConfigError(f"dataset {config.dataset!r} holds no records")
    if any(r.skeleton.num_joints != mc.num_joints for r in records):
        raise ConfigError(f"dataset joint count does not match model num_joints={mc.num_joints}")
    if config.eval_dataset is not None:
        train_records, eval_records = records, load_records(config.eval_dataset)
    else:
        train_records, eval_records = split_records(records, config.holdout_fraction)
    train_windows = _all_windows(train_records, mc.frames)
    if not train_windows:
        raise ConfigError("no training windows after the holdout split")

    seed_init, seed_shuffle, seed_flip = np.random.SeedSequence(config.seed).spawn(3)
    params = init_params(mc, seed_init)
    shuffle_rng = np.random.default_rng(seed_shuffle)
    flip_rng = np.random.default_rng(seed_flip)
    state = AdamState.for_params(params)

    log: list[dict] = []

    def emit(event: dict) -> None:
        log.append(event)
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def abort(message: str) -> None:
        emit({"event": "error", "error": "TrainingError", "message": message, "step": state.step})
        raise TrainingError(message)

    log_path.write_text("")  # fresh log per run
    save_checkpoint(ckpt_path, params, mc, extra={"epoch": -1, "steps": 0})

    steps_done = 0
    epochs_run = 0
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config.lr0, config.lr_decay)
        order = shuffle_rng.permutation(len(train_windows))
        batch_losses = []
        for lo in range(0, len(order), config.batch_size):
            if config.max_steps is not None and steps_done >= config.max_steps:
                break
            batch = [train_windows[i] for i in order[lo:lo + config.batch_size]]
            try:
                losses = []
                for win in batch:
                    if config.flip_augment and flip_rng.random() < 0.5:
                        win = hflip(win)
                    pred = forward(win.joints_2d, params, mc)
                    losses.append(mpjpe_loss(pred, win.target))
                loss = ops.scalar_mul(functools.reduce(ops.add, losses), 1.0 / len(losses))
            except NumericError as exc:  # diverged weights poison the forward pass
                abort(str(exc))
            value = loss.item()
            if not np.isfinite(value):
                abort(f"non-finite loss at step {steps_done + 1}")
            backward(loss, leaves=params.values())
            grads = {name: t.grad for name, t in params.items()}
            try:
                adam_step(params, grads, state, lr,
                          config.adam_beta1, config.adam_beta2, config.adam_eps)
            except NumericError as exc:
                abort(str(exc))
            for t in params.values():
                t.grad = None
            batch_losses.append(value)
            steps_done += 1

        if not batch_losses:  # max_steps exhausted before this epoch did anything
            break
        epochs_run = epoch + 1
        eval_mpjpe = None
        if eval_records:
            report = evaluate_params(params, mc, eval_records,
                                     flip_ensemble=config.eval_flip_ensemble)
            eval_mpjpe = report.aggregate()["mpjpe"]
        emit({
            "event": "epoch",
            "epoch": epoch,
            "lr": lr,
            "train_mpjpe": float(np.mean(batch_losses)),
            "eval_mpjpe": eval_mpjpe,
            "steps": steps_done,
        })
        save_checkpoint(ckpt_path, params, mc, extra={"epoch": epoch, "steps": steps_done})
        if config.max_steps is not None and steps_done >= config.max_steps:
            break

    return TrainResult(
        params=params,
        config=config,
        log=log,
        checkpoint_path=str(ckpt_path),
        steps=steps_done,
        epochs_run=epochs_run,
    )
