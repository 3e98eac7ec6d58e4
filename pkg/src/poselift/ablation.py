"""Ablation lattice: train the same recipe with modules toggled, compare.

Rows toggle the interaction modules and position embeddings, plus
single-stage variants (spatial-only / temporal-only via zero layers).
"""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

from .errors import ConfigError
from .evaluation import evaluate_params
from .model import param_count
from .training import TrainConfig, split_records, train
from .data import load_records

DEFAULT_ROWS: list[tuple[str, dict]] = [
    ("full", {}),
    ("no_cji", {"cji_enabled": False}),
    ("no_cfi", {"cfi_enabled": False}),
    ("no_spatial_embed", {"spatial_embed_enabled": False}),
    ("no_temporal_embed", {"temporal_embed_enabled": False}),
    ("all_off", {"cji_enabled": False, "cfi_enabled": False,
                 "spatial_embed_enabled": False, "temporal_embed_enabled": False}),
    ("spatial_only", {"temporal_layers": 0}),
    ("temporal_only", {"spatial_layers": 0}),
]

_TOGGLES = ("cji_enabled", "cfi_enabled", "spatial_embed_enabled", "temporal_embed_enabled")


def row_overrides(name: str) -> dict:
    for label, overrides in DEFAULT_ROWS:
        if label == name:
            return overrides
    raise ConfigError(f"unknown ablation row {name!r}; known: {[l for l, _ in DEFAULT_ROWS]}")


def ablate(base: TrainConfig, rows: list[str] | None = None, seeds: tuple[int, ...] = (0,)) -> list[dict]:
    """Train every (row, seed) pair; returns one result dict per run."""
    base.validate()
    labels = [l for l, _ in DEFAULT_ROWS] if rows is None else list(rows)
    if base.eval_dataset is not None:
        eval_records = load_records(base.eval_dataset)
    else:
        _, eval_records = split_records(load_records(base.dataset), base.holdout_fraction)

    results = []
    for label in labels:
        overrides = row_overrides(label)
        model = dataclasses.replace(base.model, **overrides)
        for seed in seeds:
            run = dataclasses.replace(
                base,
                model=model,
                seed=seed,
                out_dir=str(Path(base.out_dir) / f"{label}_seed{seed}"),
            )
            outcome = train(run)
            eval_mpjpe = None
            if eval_records:
                report = evaluate_params(outcome.params, model, eval_records,
                                         flip_ensemble=base.eval_flip_ensemble)
                eval_mpjpe = report.aggregate()["mpjpe"]
            epochs = [e for e in outcome.log if e.get("event") == "epoch"]
            row = {
                "row": label,
                "seed": seed,
                **{t: getattr(model, t) for t in _TOGGLES},
                "spatial_layers": model.spatial_layers,
                "temporal_layers": model.temporal_layers,
                "param_count": param_count(model),
                "train_mpjpe": epochs[-1]["train_mpjpe"] if epochs else None,
                "eval_mpjpe": eval_mpjpe,
            }
            results.append(row)
    return results


def write_ablation_csv(results: list[dict], path) -> None:
    if not results:
        raise ConfigError("no ablation results to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(results[0].keys()))
        writer.writeheader()
        writer.writerows(results)
