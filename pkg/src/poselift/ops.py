"""Differentiable primitives for the pose-lifting network.

All ops take and return :class:`~poselift.autograd.Tensor` (plain arrays are
wrapped as constants), operate in float64 and validate shapes eagerly so
failures name the offending op rather than surfacing later as broadcasting
accidents.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from . import kernels
from .autograd import Tensor, apply, as_tensor
from .errors import ConfigError, NumericError, ShapeError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _require_2d(x: Tensor, op: str) -> None:
    if x.data.ndim != 2:
        raise ShapeError(f"{op} expects a 2-D tensor, got shape {x.data.shape}")


# ---------------------------------------------------------------- arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add expects matching shapes, got {a.data.shape} and {b.data.shape}")
    return apply("add", a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub expects matching shapes, got {a.data.shape} and {b.data.shape}")
    return apply("sub", a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)])


def mul(a, b) -> Tensor:
    """Elementwise product of same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul expects matching shapes, got {a.data.shape} and {b.data.shape}")
    da, db = a.data, b.data
    return apply("mul", da * db, [(a, lambda g: g * db), (b, lambda g: g * da)])


def scalar_mul(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return apply("scalar_mul", x.data * c, [(x, lambda g: g * c)])


def add_bias(x, b) -> Tensor:
    """Add a per-column bias vector to every row of a 2-D tensor."""
    x, b = as_tensor(x), as_tensor(b)
    _require_2d(x, "add_bias")
    if b.data.shape != (x.data.shape[1],):
        raise ShapeError(f"add_bias expects bias shape ({x.data.shape[1]},), got {b.data.shape}")
    return apply("add_bias", x.data + b.data, [(x, lambda g: g), (b, lambda g: g.sum(axis=0))])


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_2d(a, "matmul")
    _require_2d(b, "matmul")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree for shapes {a.data.shape} and {b.data.shape}")
    da, db = a.data, b.data
    return apply("matmul", da @ db, [(a, lambda g: g @ db.T), (b, lambda g: da.T @ g)])


# ------------------------------------------------------------ shape plumbing


def transpose(x) -> Tensor:
    x = as_tensor(x)
    _require_2d(x, "transpose")
    return apply("transpose", np.ascontiguousarray(x.data.T), [(x, lambda g: g.T)])


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.data.size:
        raise ShapeError(f"reshape: cannot view shape {x.data.shape} as {shape}")
    src_shape = x.data.shape
    return apply("reshape", x.data.reshape(shape), [(x, lambda g: g.reshape(src_shape))])


def slice_cols(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    _require_2d(x, "slice_cols")
    cols = x.data.shape[1]
    if not (0 <= start < stop <= cols):
        raise ShapeError(f"slice_cols: range [{start}, {stop}) invalid for {cols} columns")

    def vjp(g):
        out = np.zeros_like(x.data)
        out[:, start:stop] = g
        return out

    return apply("slice_cols", np.ascontiguousarray(x.data[:, start:stop]), [(x, vjp)])


def _concat(parts, axis: int, op: str) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError(f"{op} needs at least one part")
    for p in parts:
        _require_2d(p, op)
    other = 1 - axis
    ref = parts[0].data.shape[other]
    if any(p.data.shape[other] != ref for p in parts):
        raise ShapeError(f"{op}: parts disagree on axis {other}: {[p.data.shape for p in parts]}")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def edge(i):
        lo, hi = offsets[i], offsets[i + 1]
        if axis == 0:
            return parts[i], lambda g: g[lo:hi, :]
        return parts[i], lambda g: g[:, lo:hi]

    data = np.concatenate([p.data for p in parts], axis=axis)
    return apply(op, data, [edge(i) for i in range(len(parts))])


def concat_cols(parts) -> Tensor:
    return _concat(parts, axis=1, op="concat_cols")


def concat_rows(parts) -> Tensor:
    return _concat(parts, axis=0, op="concat_rows")


def block_diag(blocks) -> Tensor:
    """Assemble G square-ish blocks (G, r, c) into a (G*r, G*c) block-diagonal matrix."""
    blocks = as_tensor(blocks)
    if blocks.data.ndim != 3:
        raise ShapeError(f"block_diag expects a (G, r, c) tensor, got shape {blocks.data.shape}")
    G, r, c = blocks.data.shape
    data = np.zeros((G * r, G * c))
    for i in range(G):
        data[i * r:(i + 1) * r, i * c:(i + 1) * c] = blocks.data[i]

    def vjp(g):
        out = np.empty((G, r, c))
        for i in range(G):
            out[i] = g[i * r:(i + 1) * r, i * c:(i + 1) * c]
        return out

    return apply("block_diag", data, [(blocks, vjp)])


# ------------------------------------------------------------------ reductions


def _scalar(g) -> float:
    return float(np.asarray(g).reshape(()))


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    shape = x.data.shape
    return apply("sum_all", np.asarray(x.data.sum()), [(x, lambda g: np.full(shape, _scalar(g)))])


def mean_all(x) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    shape = x.data.shape
    return apply("mean_all", np.asarray(x.data.mean()), [(x, lambda g: np.full(shape, _scalar(g) / n))])


def mean_row_norms(x) -> Tensor:
    """Mean Euclidean norm of the rows of a 2-D tensor.

    Rows at exactly zero use the zero subgradient.
    """
    x = as_tensor(x)
    _require_2d(x, "mean_row_norms")
    d = x.data
    norms = np.sqrt((d * d).sum(axis=1))
    R = d.shape[0]

    def vjp(g):
        safe = np.where(norms > 0.0, norms, 1.0)  # zero rows contribute zero grad
        return (_scalar(g) / R) * d / safe[:, None]

    return apply("mean_row_norms", np.asarray(norms.mean()), [(x, vjp)])


# ---------------------------------------------------------------- nonlinearities


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    # d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def gelu(x) -> Tensor:
    """Exact (erf-form) Gaussian error linear unit, applied elementwise."""
    x = as_tensor(x)
    d = x.data
    out = 0.5 * d * (1.0 + erf(d * _INV_SQRT2))
    return apply("gelu", out, [(x, lambda g: g * _gelu_grad(d))])


def softmax_rows(m) -> Tensor:
    """Row-wise softmax of a 2-D tensor, stabilized by subtracting the row max."""
    m = as_tensor(m)
    _require_2d(m, "softmax_rows")
    if not np.isfinite(m.data).all():
        raise NumericError("softmax_rows: input contains non-finite values")
    shifted = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return y * (g - (g * y).sum(axis=1, keepdims=True))

    return apply("softmax_rows", y, [(m, vjp)])


# ---------------------------------------------------------------- normalization


def layer_norm(v, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis (1/d variance), then apply affine gain/bias.

    Accepts a vector (d,) or a stack of rows (R, d); gain and bias are (d,).
    """
    v, gain, bias = as_tensor(v), as_tensor(gain), as_tensor(bias)
    if v.data.ndim not in (1, 2):
        raise ShapeError(f"layer_norm expects a 1-D or 2-D tensor, got shape {v.data.shape}")
    d = v.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(f"layer_norm: gain/bias must have shape ({d},), got {gain.data.shape} and {bias.data.shape}")

    x = v.data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = xhat * gain.data + bias.data

    gdata = gain.data

    def vjp_x(g):
        gh = g * gdata
        return inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))

    if x.ndim == 1:
        edges = [(v, vjp_x), (gain, lambda g: g * xhat), (bias, lambda g: np.array(g, copy=True))]
    else:
        edges = [(v, vjp_x), (gain, lambda g: (g * xhat).sum(axis=0)), (bias, lambda g: g.sum(axis=0))]
    return apply("layer_norm", out, edges)


def group_norm(z, groups: int, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize a (C, P) tensor over contiguous channel groups, affine per channel.

    Each of the ``groups`` slabs of C/groups channels is normalized jointly
    over its channels and all P positions (1/(C/groups * P) variance).
    """
    z, gain, bias = as_tensor(z), as_tensor(gain), as_tensor(bias)
    _require_2d(z, "group_norm")
    C, P = z.data.shape
    groups = int(groups)
    if groups < 1 or C % groups != 0:
        raise ConfigError(f"group_norm: groups={groups} does not divide {C} channels")
    if gain.data.shape != (C,) or bias.data.shape != (C,):
        raise ShapeError(f"group_norm: gain/bias must have shape ({C},), got {gain.data.shape} and {bias.data.shape}")

    xg = z.data.reshape(groups, -1)  # contiguous channel slabs
    mu = xg.mean(axis=1, keepdims=True)
    var = xg.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat_g = (xg - mu) * inv
    xhat = xhat_g.reshape(C, P)
    out = xhat * gain.data[:, None] + bias.data[:, None]

    gdata = gain.data

    def vjp_z(g):
        gh = (g * gdata[:, None]).reshape(groups, -1)
        dxg = inv * (gh - gh.mean(axis=1, keepdims=True) - xhat_g * (gh * xhat_g).mean(axis=1, keepdims=True))
        return dxg.reshape(C, P)

    edges = [
        (z, vjp_z),
        (gain, lambda g: (g * xhat).sum(axis=1)),
        (bias, lambda g: g.sum(axis=1)),
    ]
    return apply("group_norm", out, edges)


# ------------------------------------------------------------------- conv


def depthwise_conv1d(z, kernel, bias) -> Tensor:
    """Per-channel 1-D cross-correlation along positions, same zero padding.

    z: (C, P); kernel: (C, K) with K odd; bias: (C,).  Channel c of the
    output sees only channel c of the input.
    """
    z, kernel, bias = as_tensor(z), as_tensor(kernel), as_tensor(bias)
    _require_2d(z, "depthwise_conv1d")
    _require_2d(kernel, "depthwise_conv1d")
    C, P = z.data.shape
    if kernel.data.shape[0] != C:
        raise ShapeError(f"depthwise_conv1d: kernel rows {kernel.data.shape[0]} != channels {C}")
    K = kernel.data.shape[1]
    if K % 2 == 0:
        raise ConfigError(f"depthwise_conv1d: kernel size must be odd, got {K}")
    if bias.data.shape != (C,):
        raise ShapeError(f"depthwise_conv1d: bias must have shape ({C},), got {bias.data.shape}")

    zd, kd = z.data, kernel.data
    out = kernels.dw_conv(zd, kd, bias.data)
    no_bias = np.zeros(C)

    edges = [
        # input grad: correlate the output grad with the reversed kernels
        (z, lambda g: kernels.dw_conv(g, np.ascontiguousarray(kd[:, ::-1]), no_bias)),
        (kernel, lambda g: kernels.dw_conv_kernel_grad(zd, np.ascontiguousarray(g), K)),
        (bias, lambda g: g.sum(axis=1)),
    ]
    return apply("depthwise_conv1d", out, edges)


# --------------------------------------------------------------- tensor sugar


def _neg(self):
    return scalar_mul(self, -1.0)


def _mul_dispatch(self, other):
    if isinstance(other, (int, float)):
        return scalar_mul(self, other)
    return mul(self, other)


Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__mul__ = _mul_dispatch
Tensor.__rmul__ = _mul_dispatch
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__neg__ = _neg
