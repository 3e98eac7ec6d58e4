"""Checkpoint format: bitwise round-trips and corruption handling."""

import json

import numpy as np
import pytest

from poselift.checkpoint import load_checkpoint, save_checkpoint
from poselift.errors import ConfigError, DataError
from poselift.model import ModelConfig, init_params, param_slots


def small():
    return ModelConfig(num_joints=3, frames=3, spatial_dim=4,
                       spatial_layers=1, temporal_layers=1, heads=2)


def test_roundtrip_is_bitwise(tmp_path, rng):
    cfg = small()
    params = init_params(cfg, seed=4)
    for t in params.values():
        t.data += rng.normal(size=t.data.shape)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, cfg, extra={"epoch": 3, "note": "x"})
    loaded, cfg2, extra = load_checkpoint(path)
    assert cfg2 == cfg
    assert extra == {"epoch": 3, "note": "x"}
    assert list(loaded) == [name for name, _ in param_slots(cfg)]
    for name in params:
        assert np.array_equal(loaded[name].data, params[name].data)
        assert loaded[name].requires_grad


def test_default_extra_is_empty(tmp_path):
    cfg = small()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, init_params(cfg), cfg)
    _, _, extra = load_checkpoint(path)
    assert extra == {}


def test_save_validates_params(tmp_path):
    cfg = small()
    params = init_params(cfg)
    del params["head.frame_weights"]
    with pytest.raises(ConfigError):
        save_checkpoint(tmp_path / "m.ckpt", params, cfg)


def test_rejects_garbage_header(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"\x93NUMPY not a checkpoint\n" + b"\x00" * 64)
    with pytest.raises(DataError, match="header"):
        load_checkpoint(path)


def test_rejects_wrong_format_version(tmp_path):
    cfg = small()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, init_params(cfg), cfg)
    header, _, payload = path.read_bytes().partition(b"\n")
    doc = json.loads(header)
    doc["format_version"] = 99
    path.write_bytes(json.dumps(doc).encode() + b"\n" + payload)
    with pytest.raises(DataError, match="version"):
        load_checkpoint(path)


def test_rejects_ledger_mismatch(tmp_path):
    cfg = small()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, init_params(cfg), cfg)
    header, _, payload = path.read_bytes().partition(b"\n")
    doc = json.loads(header)
    doc["slots"][0]["shape"] = [7, 7]
    path.write_bytes(json.dumps(doc).encode() + b"\n" + payload)
    with pytest.raises(ConfigError, match="ledger"):
        load_checkpoint(path)


def test_rejects_truncated_payload(tmp_path):
    cfg = small()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, init_params(cfg), cfg)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])  # drop two float64 values
    with pytest.raises(DataError, match="payload"):
        load_checkpoint(path)
