"""Spatio-temporal transformer that lifts a window of 2D poses to a 3D pose.

Per frame, a spatial transformer mixes joint tokens (dimension
``spatial_dim``); the per-frame features are then flattened and a temporal
transformer mixes frame tokens (dimension ``num_joints * spatial_dim``).
Interleaved with attention, spatial blocks carry a cross-joint interaction
module (depthwise convs over joints) and temporal blocks a cross-frame
interaction module (bilinear frame mixing without softmax).  A regression
head collapses frames and emits the center frame's 3D pose.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .autograd import Tensor, no_grad
from .errors import ConfigError, ShapeError

Params = dict[str, Tensor]

_SCALE_MODES = ("per_head_dim", "token_count")


@dataclass
class ModelConfig:
    num_joints: int
    frames: int
    spatial_dim: int = 32
    spatial_layers: int = 4
    temporal_layers: int = 4
    heads: int = 8
    mlp_ratio: float = 2.0
    attention_scale: str = "per_head_dim"
    cji_enabled: bool = True
    cfi_enabled: bool = True
    spatial_embed_enabled: bool = True
    temporal_embed_enabled: bool = True
    groupnorm_groups: int = 1
    cji_kernel: int = 5
    cfi_full_maps: bool = False
    head_norm_after_projection: bool = False
    dropout: float = 0.0  # reserved hook; must stay 0.0

    @property
    def temporal_dim(self) -> int:
        return self.num_joints * self.spatial_dim

    def spatial_hidden(self) -> int:
        return int(round(self.mlp_ratio * self.spatial_dim))

    def temporal_hidden(self) -> int:
        return int(round(self.mlp_ratio * self.temporal_dim))

    def validate(self) -> "ModelConfig":
        if self.num_joints < 1:
            raise ConfigError(f"num_joints must be >= 1, got {self.num_joints}")
        if self.frames < 1 or self.frames % 2 == 0:
            raise ConfigError(f"frames must be odd and >= 1, got {self.frames}")
        if self.spatial_dim < 1:
            raise ConfigError(f"spatial_dim must be >= 1, got {self.spatial_dim}")
        if self.spatial_layers < 0 or self.temporal_layers < 0:
            raise ConfigError("layer counts must be >= 0")
        if self.heads < 1:
            raise ConfigError(f"heads must be >= 1, got {self.heads}")
        if self.spatial_layers > 0 and self.spatial_dim % self.heads != 0:
            raise ConfigError(f"heads={self.heads} must divide spatial_dim={self.spatial_dim}")
        if self.temporal_layers > 0 and self.temporal_dim % self.heads != 0:
            raise ConfigError(f"heads={self.heads} must divide temporal_dim={self.temporal_dim}")
        if self.mlp_ratio <= 0 or self.spatial_hidden() < 1 or self.temporal_hidden() < 1:
            raise ConfigError(f"mlp_ratio={self.mlp_ratio} gives an empty hidden layer")
        if self.attention_scale not in _SCALE_MODES:
            raise ConfigError(f"attention_scale must be one of {_SCALE_MODES}, got {self.attention_scale!r}")
        if self.cji_kernel < 1 or self.cji_kernel % 2 == 0:
            raise ConfigError(f"cji_kernel must be odd and >= 1, got {self.cji_kernel}")
        if self.groupnorm_groups < 1:
            raise ConfigError(f"groupnorm_groups must be >= 1, got {self.groupnorm_groups}")
        if self.cji_enabled and self.spatial_layers > 0 and self.spatial_dim % self.groupnorm_groups != 0:
            raise ConfigError(f"groupnorm_groups={self.groupnorm_groups} must divide spatial_dim={self.spatial_dim}")
        if self.cfi_enabled and self.temporal_layers > 0 and self.temporal_dim % self.groupnorm_groups != 0:
            raise ConfigError(f"groupnorm_groups={self.groupnorm_groups} must divide temporal_dim={self.temporal_dim}")
        if self.dropout != 0.0:
            raise ConfigError("dropout is a reserved hook and must be 0.0")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d).validate()


# ------------------------------------------------------------------ parameters


def param_slots(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) ledger of every trainable slot.

    The order is execution order and is the storage order used by
    checkpoints and the optimizer.
    """
    config.validate()
    J, F, D = config.num_joints, config.frames, config.spatial_dim
    C = config.temporal_dim
    k = config.cji_kernel
    slots: list[tuple[str, tuple[int, ...]]] = [
        ("joint_embed.weight", (2, D)),
        ("joint_embed.bias", (D,)),
    ]
    if config.spatial_embed_enabled:
        slots.append(("spatial_pos", (J, D)))
    if config.temporal_embed_enabled:
        slots.append(("temporal_pos", (F, C)))

    def norm(prefix: str, dim: int):
        return [(prefix + ".gain", (dim,)), (prefix + ".bias", (dim,))]

    def attention(prefix: str, dim: int):
        out = []
        for name in ("q", "k", "v", "out"):
            out.append((f"{prefix}.{name}_weight", (dim, dim)))
            out.append((f"{prefix}.{name}_bias", (dim,)))
        return out

    def mlp(prefix: str, dim: int, hidden: int):
        return [
            (prefix + ".w1", (dim, hidden)),
            (prefix + ".b1", (hidden,)),
            (prefix + ".w2", (hidden, dim)),
            (prefix + ".b2", (dim,)),
        ]

    for i in range(config.spatial_layers):
        p = f"spatial.{i}"
        slots += norm(p + ".ln_attn", D)
        slots += attention(p + ".attn", D)
        if config.cji_enabled:
            slots += [
                (p + ".cji.conv_in.kernel", (D, k)),
                (p + ".cji.conv_in.bias", (D,)),
            ]
            slots += norm(p + ".cji.gn", D)
            slots += [
                (p + ".cji.conv_out.kernel", (D, k)),
                (p + ".cji.conv_out.bias", (D,)),
            ]
        slots += norm(p + ".ln_mlp", D)
        slots += mlp(p + ".mlp", D, config.spatial_hidden())
        slots += norm(p + ".ln_out", D)

    # Frame-mixing maps are block-diagonal per joint by default, which keeps
    # the temporal stage's interaction module a small fraction of the block;
    # cfi_full_maps=True switches to dense temporal_dim x temporal_dim maps.
    map_shape = (C, C) if config.cfi_full_maps else (J, D, D)
    for i in range(config.temporal_layers):
        p = f"temporal.{i}"
        slots += norm(p + ".ln_attn", C)
        slots += attention(p + ".attn", C)
        if config.cfi_enabled:
            slots += [
                (p + ".cfi.k_weight", map_shape),
                (p + ".cfi.q_weight", map_shape),
                (p + ".cfi.v_weight", map_shape),
                (p + ".cfi.conv.weight", map_shape),
                (p + ".cfi.conv.bias", (C,)),
            ]
            slots += norm(p + ".cfi.gn", C)
        slots += norm(p + ".ln_mlp", C)
        slots += mlp(p + ".mlp", C, config.temporal_hidden())
        slots += norm(p + ".ln_out", C)

    slots.append(("head.frame_weights", (F,)))
    if config.head_norm_after_projection:
        slots += [("head.proj.weight", (C, J * 3)), ("head.proj.bias", (J * 3,))]
        slots += norm("head.ln", J * 3)
    else:
        slots += norm("head.ln", C)
        slots += [("head.proj.weight", (C, J * 3)), ("head.proj.bias", (J * 3,))]
    return slots


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(shape, dtype=np.int64)) for _, shape in param_slots(config))


def init_params(config: ModelConfig, seed: int = 0) -> Params:
    """Draw parameters in ledger order: N(0, 0.02) for weights, ones for
    normalization gains, zeros for biases and position tables."""
    rng = np.random.default_rng(seed)
    params: Params = {}
    for name, shape in param_slots(config):
        if name.endswith(".gain"):
            data = np.ones(shape)
        elif name in ("spatial_pos", "temporal_pos") or name.endswith(".bias"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, 0.02, size=shape)
        params[name] = Tensor(data, requires_grad=True)
    return params


def check_params(params: Params, config: ModelConfig) -> None:
    """Verify the dict carries exactly the ledger's slots with right shapes."""
    expected = dict(param_slots(config))
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise ConfigError(f"parameter slots mismatch: missing={missing}, unexpected={extra}")
    for name, shape in expected.items():
        if params[name].data.shape != shape:
            raise ShapeError(f"slot {name!r} has shape {params[name].data.shape}, expected {shape}")


# ------------------------------------------------------------------ components


def embed_joints(frame_2d, params: Params, config: ModelConfig) -> Tensor:
    """Project one frame's (J, 2) coordinates to (J, spatial_dim) joint tokens."""
    x = frame_2d if isinstance(frame_2d, Tensor) else Tensor(frame_2d)
    J = config.num_joints
    if x.data.shape != (J, 2):
        raise ShapeError(f"embed_joints expects shape ({J}, 2), got {x.data.shape}")
    z = ops.add_bias(ops.matmul(x, params["joint_embed.weight"]), params["joint_embed.bias"])
    if config.spatial_embed_enabled:
        z = ops.add(z, params["spatial_pos"])
    return z


def multi_head_attention(z, params: Params, prefix: str, heads: int, scale_mode: str = "per_head_dim") -> Tensor:
    """Standard softmax attention over the rows of ``z`` ((P, dim) tokens).

    ``scale_mode`` picks the score denominator: sqrt(dim/heads) for
    "per_head_dim", sqrt(P) for "token_count".
    """
    z = z if isinstance(z, Tensor) else Tensor(z)
    P, dim = z.data.shape
    if dim % heads != 0:
        raise ShapeError(f"heads={heads} must divide token dim {dim}")
    if scale_mode not in _SCALE_MODES:
        raise ConfigError(f"unknown attention scale mode {scale_mode!r}")
    dh = dim // heads
    scale = 1.0 / math.sqrt(dh if scale_mode == "per_head_dim" else P)

    q = ops.add_bias(ops.matmul(z, params[prefix + ".q_weight"]), params[prefix + ".q_bias"])
    k = ops.add_bias(ops.matmul(z, params[prefix + ".k_weight"]), params[prefix + ".k_bias"])
    v = ops.add_bias(ops.matmul(z, params[prefix + ".v_weight"]), params[prefix + ".v_bias"])

    mixed = []
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        qh, kh, vh = (ops.slice_cols(t, lo, hi) for t in (q, k, v))
        scores = ops.scalar_mul(ops.matmul(qh, ops.transpose(kh)), scale)
        mixed.append(ops.matmul(ops.softmax_rows(scores), vh))
    cat = mixed[0] if heads == 1 else ops.concat_cols(mixed)
    return ops.add_bias(ops.matmul(cat, params[prefix + ".out_weight"]), params[prefix + ".out_bias"])


def _mlp(z: Tensor, params: Params, prefix: str) -> Tensor:
    h = ops.gelu(ops.add_bias(ops.matmul(z, params[prefix + ".w1"]), params[prefix + ".b1"]))
    return ops.add_bias(ops.matmul(h, params[prefix + ".w2"]), params[prefix + ".b2"])


def cji(z, params: Params, prefix: str, config: ModelConfig) -> Tensor:
    """Cross-joint interaction: depthwise convs over the joint axis, residual.

    The (J, D) tokens are transposed to (D, J) so each feature channel is
    convolved along joints: conv -> GELU -> group norm -> conv, then the
    result is added back to the input.
    """
    z = z if isinstance(z, Tensor) else Tensor(z)
    zt = ops.transpose(z)
    h = ops.depthwise_conv1d(zt, params[prefix + ".conv_in.kernel"], params[prefix + ".conv_in.bias"])
    h = ops.gelu(h)
    h = ops.group_norm(h, config.groupnorm_groups, params[prefix + ".gn.gain"], params[prefix + ".gn.bias"])
    h = ops.depthwise_conv1d(h, params[prefix + ".conv_out.kernel"], params[prefix + ".conv_out.bias"])
    return ops.add(ops.transpose(h), z)


def spatial_block(z, params: Params, index: int, config: ModelConfig) -> Tensor:
    p = f"spatial.{index}"
    z = z if isinstance(z, Tensor) else Tensor(z)
    attn_in = ops.layer_norm(z, params[p + ".ln_attn.gain"], params[p + ".ln_attn.bias"])
    z = ops.add(multi_head_attention(attn_in, params, p + ".attn", config.heads, config.attention_scale), z)
    if config.cji_enabled:
        z = cji(z, params, p + ".cji", config)
    mlp_in = ops.layer_norm(z, params[p + ".ln_mlp.gain"], params[p + ".ln_mlp.bias"])
    z = ops.add(_mlp(mlp_in, params, p + ".mlp"), z)
    return ops.layer_norm(z, params[p + ".ln_out.gain"], params[p + ".ln_out.bias"])


def _frame_map(params: Params, name: str) -> Tensor:
    """A frame-mixing map as a dense matrix (assembled when stored per joint)."""
    w = params[name]
    return ops.block_diag(w) if w.data.ndim == 3 else w


def cfi(z, params: Params, prefix: str, config: ModelConfig) -> Tensor:
    """Cross-frame interaction: bilinear frame mixing without softmax.

    With K = Z Wk, Q = Z Wq, V = Z Wv, the (F, F) score matrix K Q^T is
    scaled by 1/temporal_dim and applied to V; a pointwise channel conv and
    a group norm follow, then the residual.
    """
    z = z if isinstance(z, Tensor) else Tensor(z)
    F, C = z.data.shape
    k = ops.matmul(z, _frame_map(params, prefix + ".k_weight"))
    q = ops.matmul(z, _frame_map(params, prefix + ".q_weight"))
    v = ops.matmul(z, _frame_map(params, prefix + ".v_weight"))
    scores = ops.scalar_mul(ops.matmul(k, ops.transpose(q)), 1.0 / C)
    mixed = ops.matmul(scores, v)
    h = ops.add_bias(ops.matmul(mixed, _frame_map(params, prefix + ".conv.weight")), params[prefix + ".conv.bias"])
    h = ops.group_norm(ops.transpose(h), config.groupnorm_groups, params[prefix + ".gn.gain"], params[prefix + ".gn.bias"])
    return ops.add(ops.transpose(h), z)


def temporal_block(z, params: Params, index: int, config: ModelConfig) -> Tensor:
    p = f"temporal.{index}"
    z = z if isinstance(z, Tensor) else Tensor(z)
    attn_in = ops.layer_norm(z, params[p + ".ln_attn.gain"], params[p + ".ln_attn.bias"])
    z = ops.add(multi_head_attention(attn_in, params, p + ".attn", config.heads, config.attention_scale), z)
    if config.cfi_enabled:
        z = cfi(z, params, p + ".cfi", config)
    mlp_in = ops.layer_norm(z, params[p + ".ln_mlp.gain"], params[p + ".ln_mlp.bias"])
    z = ops.add(_mlp(mlp_in, params, p + ".mlp"), z)
    return ops.layer_norm(z, params[p + ".ln_out.gain"], params[p + ".ln_out.bias"])


def spatial_features(window, params: Params, config: ModelConfig) -> Tensor:
    """Run the per-frame spatial stage; rows are flattened frames (F, J*D)."""
    data = window.data if isinstance(window, Tensor) else np.asarray(window, dtype=np.float64)
    F, J = config.frames, config.num_joints
    if data.shape != (F, J, 2):
        raise ShapeError(f"forward expects a window of shape ({F}, {J}, 2), got {data.shape}")
    rows = []
    for f in range(F):
        z = embed_joints(data[f], params, config)
        for i in range(config.spatial_layers):
            z = spatial_block(z, params, i, config)
        rows.append(ops.reshape(z, (1, J * config.spatial_dim)))
    return rows[0] if F == 1 else ops.concat_rows(rows)


def regression_head(z, params: Params, config: ModelConfig) -> Tensor:
    """Collapse frames with a learned weighting and project to (J, 3)."""
    z = z if isinstance(z, Tensor) else Tensor(z)
    F, C = config.frames, config.temporal_dim
    if z.data.shape != (F, C):
        raise ShapeError(f"regression_head expects shape ({F}, {C}), got {z.data.shape}")
    w = ops.reshape(params["head.frame_weights"], (1, F))
    y = ops.matmul(w, z)  # (1, C) weighted frame average
    if config.head_norm_after_projection:
        y = ops.add_bias(ops.matmul(y, params["head.proj.weight"]), params["head.proj.bias"])
        y = ops.layer_norm(y, params["head.ln.gain"], params["head.ln.bias"])
    else:
        y = ops.layer_norm(y, params["head.ln.gain"], params["head.ln.bias"])
        y = ops.add_bias(ops.matmul(y, params["head.proj.weight"]), params["head.proj.bias"])
    return ops.reshape(y, (config.num_joints, 3))


def forward(window, params: Params, config: ModelConfig) -> Tensor:
    """Lift a (F, J, 2) window to the center frame's (J, 3) pose."""
    z = spatial_features(window, params, config)
    if config.temporal_embed_enabled:
        z = ops.add(z, params["temporal_pos"])
    for i in range(config.temporal_layers):
        z = temporal_block(z, params, i, config)
    return regression_head(z, params, config)


def predict(window, params: Params, config: ModelConfig) -> np.ndarray:
    """Forward pass without graph recording; returns a plain (J, 3) array."""
    with no_grad():
        return forward(window, params, config).data
