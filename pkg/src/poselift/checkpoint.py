"""Single-file checkpoint format: one JSON header line, then raw slot data.

The header records the format version, the model config, optional extra
metadata and the ordered slot ledger; the payload is the slots' float64
data concatenated little-endian in ledger order.  Round-trips are bitwise.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autograd import Tensor
from .errors import ConfigError, DataError
from .model import ModelConfig, Params, check_params, param_slots

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def save_checkpoint(path, params: Params, config: ModelConfig, extra: dict | None = None) -> None:
    check_params(params, config)
    slots = param_slots(config)
    header = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "extra": extra or {},
        "slots": [{"name": name, "shape": list(shape)} for name, shape in slots],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for name, _ in slots:
            fh.write(np.ascontiguousarray(params[name].data, dtype=_DTYPE).tobytes())


def load_checkpoint(path) -> tuple[Params, ModelConfig, dict]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed checkpoint header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint format version {version!r}")
    config = ModelConfig.from_dict(header["config"])

    expected = param_slots(config)
    stored = [(s["name"], tuple(s["shape"])) for s in header.get("slots", [])]
    if stored != expected:
        raise ConfigError(f"{path}: slot ledger does not match the stored config")

    total = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in expected)
    flat = np.frombuffer(blob, dtype=_DTYPE)
    if flat.size != total:
        raise DataError(f"{path}: payload holds {flat.size} values, ledger requires {total}")

    params: Params = {}
    offset = 0
    for name, shape in expected:
        n = int(np.prod(shape, dtype=np.int64))
        params[name] = Tensor(flat[offset:offset + n].reshape(shape), requires_grad=True)
        offset += n
    return params, config, header.get("extra", {})
