"""Ablation lattice bookkeeping (full training sweeps live in the CLI tests)."""

import dataclasses

import numpy as np
import pytest

from poselift.ablation import DEFAULT_ROWS, ablate, row_overrides, write_ablation_csv
from poselift.data import default_skeleton, make_dataset, save_records
from poselift.errors import ConfigError
from poselift.model import ModelConfig, param_count
from poselift.training import TrainConfig


def test_row_catalogue():
    labels = [l for l, _ in DEFAULT_ROWS]
    assert labels == ["full", "no_cji", "no_cfi", "no_spatial_embed",
                      "no_temporal_embed", "all_off", "spatial_only", "temporal_only"]
    assert row_overrides("full") == {}
    assert row_overrides("spatial_only") == {"temporal_layers": 0}
    with pytest.raises(ConfigError, match="bogus"):
        row_overrides("bogus")


def test_all_off_row_equals_hand_built_config():
    # toggling everything off must yield the same architecture (and hence
    # parameter ledger) as constructing the stripped config directly
    base = ModelConfig(num_joints=17, frames=27)
    via_row = dataclasses.replace(base, **row_overrides("all_off"))
    by_hand = ModelConfig(num_joints=17, frames=27, cji_enabled=False,
                          cfi_enabled=False, spatial_embed_enabled=False,
                          temporal_embed_enabled=False)
    assert via_row == by_hand
    assert param_count(via_row) == param_count(by_hand)
    assert param_count(via_row) < param_count(base)


def test_ablate_result_rows(tmp_path):
    recs = make_dataset(default_skeleton(3), seed=5, num_records=2, length=6,
                        pose_scale=0.01)
    data = tmp_path / "d.jsonl"
    save_records(data, recs)
    base = TrainConfig(
        model=ModelConfig(num_joints=3, frames=3, spatial_dim=4,
                          spatial_layers=1, temporal_layers=1, heads=2),
        dataset=str(data), out_dir=str(tmp_path / "runs"), epochs=1,
        batch_size=4, lr0=1e-3, holdout_fraction=0.5,
        flip_augment=False, eval_flip_ensemble=False)
    results = ablate(base, rows=["full", "no_cji"], seeds=(0, 1))
    assert [(r["row"], r["seed"]) for r in results] == [
        ("full", 0), ("full", 1), ("no_cji", 0), ("no_cji", 1)]
    for r in results:
        assert np.isfinite(r["train_mpjpe"]) and np.isfinite(r["eval_mpjpe"])
    full, no_cji = results[0], results[2]
    assert full["cji_enabled"] and not no_cji["cji_enabled"]
    assert no_cji["param_count"] < full["param_count"]
    # per-run outputs land in separate directories
    assert (tmp_path / "runs" / "full_seed0" / "checkpoint.ckpt").exists()
    assert (tmp_path / "runs" / "no_cji_seed1" / "train_log.jsonl").exists()

    csv_path = tmp_path / "table.csv"
    write_ablation_csv(results, csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0].startswith("row,seed,cji_enabled,")
    assert len(lines) == 5


def test_ablation_csv_requires_rows(tmp_path):
    with pytest.raises(ConfigError):
        write_ablation_csv([], tmp_path / "x.csv")
