"""Primitive ops: value oracles plus the blanket finite-difference invariant.

Every op's vjp is checked against central differences at eps=1e-5 with
relative error < 1e-6 over at least 20 random instances.
"""

import numpy as np
import pytest
from scipy.special import erf

import poselift.ops as ops
from poselift.autograd import Tensor, backward, finite_diff_check
from poselift.errors import ConfigError, NumericError, ShapeError

N_INSTANCES = 20
FD_EPS = 1e-5
FD_TOL = 1e-6


def t(rng, *shape, scale=1.0):
    return Tensor(scale * rng.normal(size=shape), requires_grad=True)


# ------------------------------------------------------------- value oracles


def test_matmul_identity_and_scalar(rng):
    a = rng.normal(size=(3, 3))
    assert np.allclose(ops.matmul(a, np.eye(3)).data, a, atol=0, rtol=0)
    assert ops.matmul([[2.0]], [[3.0]]).data[0, 0] == 6.0


def test_matmul_against_triple_loop(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    want = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                want[i, j] += a[i, k] * b[k, j]
    assert np.abs(ops.matmul(a, b).data - want).max() < 1e-12


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_softmax_values(rng):
    assert np.allclose(ops.softmax_rows([[0.0, 0.0]]).data, [[0.5, 0.5]])
    x = rng.uniform(-3, 3)
    assert np.allclose(ops.softmax_rows([[x, x, x]]).data, [[1 / 3] * 3])
    row = np.array([[1.0, 2.0, 3.0]])
    direct = np.exp(row) / np.exp(row).sum()
    assert np.abs(ops.softmax_rows(row).data - direct).max() < 1e-12


def test_softmax_rows_sum_to_one(rng):
    m = rng.uniform(-50.0, 50.0, size=(40, 7))
    y = ops.softmax_rows(m).data
    assert np.abs(y.sum(axis=1) - 1.0).max() < 1e-9


def test_softmax_shift_invariance(rng):
    m = rng.normal(size=(5, 6))
    for c in (-17.5, 3.0, 40.0):
        shifted = ops.softmax_rows(m + c).data
        assert np.abs(shifted - ops.softmax_rows(m).data).max() < 1e-9


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericError):
        ops.softmax_rows(np.array([[1.0, np.nan]]))


def test_gelu_values():
    assert ops.gelu(np.zeros((1, 1))).data[0, 0] == 0.0
    assert abs(ops.gelu(np.full((1, 1), 10.0)).data[0, 0] - 10.0) < 1e-9
    phi_1 = 0.5 * (1.0 + erf(1.0 / np.sqrt(2.0)))
    assert abs(ops.gelu(np.ones((1, 1))).data[0, 0] - phi_1) < 1e-12


def test_layer_norm_values(rng):
    d = 6
    gain, bias = np.ones(d), np.zeros(d)
    assert np.allclose(ops.layer_norm(np.full(d, 3.7), gain, bias).data, 0.0)
    v = rng.normal(size=d) * 30.0  # var >> eps so the eps bias stays below 1e-6
    out = ops.layer_norm(v, gain, bias).data
    assert abs(out.mean()) < 1e-10
    assert abs(out.var() - 1.0) < 1e-6
    # direct 1/d-variance formula
    want = (v - v.mean()) / np.sqrt(v.var() + 1e-5)
    assert np.abs(out - want).max() < 1e-12


def test_layer_norm_shift_and_scale_invariance(rng):
    d = 8
    v = rng.normal(size=d) * 100.0  # var >> eps: the eps term shifts scaled copies ~eps/var
    base = ops.layer_norm(v, np.ones(d), np.zeros(d)).data
    for a, b in ((2.0, 0.0), (1.0, -4.5), (3.25, 7.0)):
        out = ops.layer_norm(a * v + b, np.ones(d), np.zeros(d)).data
        assert np.abs(out - base).max() < 1e-8


def test_layer_norm_rows(rng):
    x = rng.normal(size=(4, 5))
    gain, bias = rng.normal(size=5), rng.normal(size=5)
    out = ops.layer_norm(x, gain, bias).data
    for r in range(4):
        assert np.abs(out[r] - ops.layer_norm(x[r], gain, bias).data).max() < 1e-12


def test_layer_norm_shape_errors():
    with pytest.raises(ShapeError):
        ops.layer_norm(np.ones((2, 2, 2)), np.ones(2), np.zeros(2))
    with pytest.raises(ShapeError):
        ops.layer_norm(np.ones(4), np.ones(3), np.zeros(4))


def test_group_norm_values(rng):
    gain, bias = np.ones(4), np.zeros(4)
    assert np.allclose(ops.group_norm(np.full((4, 3), 2.0), 1, gain, bias).data, 0.0)
    z = rng.normal(size=(4, 3))
    per_channel = ops.group_norm(z, 4, gain, bias).data
    assert np.abs(per_channel.mean(axis=1)).max() < 1e-10


def test_group_norm_against_per_group_formula(rng):
    z = rng.normal(size=(4, 3))
    gain, bias = rng.normal(size=4), rng.normal(size=4)
    out = ops.group_norm(z, 2, gain, bias).data
    want = np.empty_like(z)
    for g in range(2):
        slab = z[2 * g:2 * g + 2]
        xhat = (slab - slab.mean()) / np.sqrt(slab.var() + 1e-5)
        want[2 * g:2 * g + 2] = xhat * gain[2 * g:2 * g + 2, None] + bias[2 * g:2 * g + 2, None]
    assert np.abs(out - want).max() < 1e-12


def test_group_norm_group_errors():
    with pytest.raises(ConfigError):
        ops.group_norm(np.ones((4, 3)), 3, np.ones(4), np.zeros(4))
    with pytest.raises(ShapeError):
        ops.group_norm(np.ones((4, 3)), 2, np.ones(3), np.zeros(4))


def test_depthwise_conv_delta_kernel_is_identity(rng):
    z = rng.normal(size=(3, 7))
    kernel = np.zeros((3, 5))
    kernel[:, 2] = 1.0  # center tap
    out = ops.depthwise_conv1d(z, kernel, np.zeros(3)).data
    assert np.array_equal(out, z)


def test_depthwise_conv_tap_counting():
    out = ops.depthwise_conv1d(np.ones((2, 7)), np.ones((2, 5)), np.zeros(2)).data
    assert np.allclose(out[:, 2:5], 5.0)  # interior: all five taps
    assert np.allclose(out[:, 0], 3.0)    # two zero pads fall off the edge


def test_depthwise_conv_against_sliding_window(rng):
    z = rng.normal(size=(2, 7))
    kernel = rng.normal(size=(2, 5))
    bias = rng.normal(size=2)
    padded = np.pad(z, ((0, 0), (2, 2)))
    want = np.empty((2, 7))
    for c in range(2):
        for p in range(7):
            want[c, p] = bias[c] + (kernel[c] * padded[c, p:p + 5]).sum()
    out = ops.depthwise_conv1d(z, kernel, bias).data
    assert np.abs(out - want).max() < 1e-12


def test_depthwise_conv_linear_in_input(rng):
    kernel = rng.normal(size=(3, 3))
    zero_bias = np.zeros(3)
    x, y = rng.normal(size=(3, 6)), rng.normal(size=(3, 6))
    a, b = 1.7, -0.4
    lhs = ops.depthwise_conv1d(a * x + b * y, kernel, zero_bias).data
    rhs = a * ops.depthwise_conv1d(x, kernel, zero_bias).data \
        + b * ops.depthwise_conv1d(y, kernel, zero_bias).data
    assert np.abs(lhs - rhs).max() < 1e-10


def test_depthwise_conv_rejects_even_kernel():
    with pytest.raises(ConfigError):
        ops.depthwise_conv1d(np.ones((2, 5)), np.ones((2, 4)), np.zeros(2))
    with pytest.raises(ShapeError):
        ops.depthwise_conv1d(np.ones((2, 5)), np.ones((3, 5)), np.zeros(2))


def test_block_diag_layout(rng):
    blocks = rng.normal(size=(2, 2, 3))
    out = ops.block_diag(blocks).data
    assert out.shape == (4, 6)
    assert np.array_equal(out[:2, :3], blocks[0])
    assert np.array_equal(out[2:, 3:], blocks[1])
    assert np.all(out[:2, 3:] == 0.0) and np.all(out[2:, :3] == 0.0)
    with pytest.raises(ShapeError):
        ops.block_diag(np.ones((2, 2)))


def test_slice_and_concat_roundtrip(rng):
    x = rng.normal(size=(3, 6))
    xt = Tensor(x, requires_grad=True)
    parts = [ops.slice_cols(xt, i, i + 2) for i in (0, 2, 4)]
    assert np.array_equal(ops.concat_cols(parts).data, x)
    with pytest.raises(ShapeError):
        ops.slice_cols(xt, 4, 11)
    with pytest.raises(ShapeError):
        ops.concat_rows([np.ones((2, 3)), np.ones((2, 4))])


def test_mean_row_norms_zero_row_subgradient():
    x = Tensor(np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]]), requires_grad=True)
    loss = ops.mean_row_norms(x)
    assert loss.item() == pytest.approx(2.5)  # (5 + 0) / 2
    backward(loss)
    assert np.allclose(x.grad[0], np.array([3.0, 4.0, 0.0]) / (5.0 * 2))
    assert np.array_equal(x.grad[1], np.zeros(3))


def test_operator_sugar(rng):
    a = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    assert np.array_equal((a + b).data, a.data + b.data)
    assert np.array_equal((a - b).data, a.data - b.data)
    assert np.array_equal((a * b).data, a.data * b.data)
    assert np.array_equal((2.0 * a).data, 2.0 * a.data)
    assert np.array_equal((-a).data, -a.data)
    assert np.allclose((a @ b).data, a.data @ b.data)


# ------------------------------------- blanket finite-difference invariant

# Each case builds (name, params, f) afresh per instance; params are small so
# the per-entry central differences stay cheap.

def _fd_cases(rng):
    gain, bias = t(rng, 5), t(rng, 5)
    g4, b4 = t(rng, 4), t(rng, 4)
    return [
        ("add", [t(rng, 3, 4), t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.add(p[0], p[1]))),
        ("sub", [t(rng, 3, 4), t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.sub(p[0], p[1]))),
        ("mul", [t(rng, 3, 4), t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.mul(p[0], p[1]))),
        ("scalar_mul", [t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.scalar_mul(p[0], -1.3))),
        ("add_bias", [t(rng, 3, 4), t(rng, 4)],
         lambda p: ops.sum_all(ops.mul(ops.add_bias(p[0], p[1]), ops.add_bias(p[0], p[1])))),
        ("matmul", [t(rng, 3, 4), t(rng, 4, 2)],
         lambda p: ops.mean_all(ops.gelu(ops.matmul(p[0], p[1])))),
        ("transpose", [t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.mul(ops.transpose(p[0]), ops.transpose(p[0])))),
        ("reshape", [t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.gelu(ops.reshape(p[0], (2, 6))))),
        ("slice_cols", [t(rng, 3, 5)],
         lambda p: ops.sum_all(ops.gelu(ops.slice_cols(p[0], 1, 4)))),
        ("concat_cols", [t(rng, 3, 2), t(rng, 3, 3)],
         lambda p: ops.sum_all(ops.gelu(ops.concat_cols([p[0], p[1]])))),
        ("concat_rows", [t(rng, 2, 4), t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.gelu(ops.concat_rows([p[0], p[1]])))),
        ("block_diag", [t(rng, 2, 2, 3)],
         lambda p: ops.sum_all(ops.gelu(ops.block_diag(p[0])))),
        ("sum_all", [t(rng, 3, 4)],
         lambda p: ops.scalar_mul(ops.sum_all(ops.mul(p[0], p[0])), 0.5)),
        ("mean_all", [t(rng, 3, 4)],
         lambda p: ops.mean_all(ops.mul(p[0], p[0]))),
        # keep rows away from the norm kink (offset 3 dominates N(0,1) entries)
        ("mean_row_norms", [Tensor(rng.normal(size=(4, 3)) + 3.0, requires_grad=True)],
         lambda p: ops.mean_row_norms(p[0])),
        ("gelu", [t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.mul(ops.gelu(p[0]), ops.gelu(p[0])))),
        ("softmax_rows", [t(rng, 3, 4)],
         lambda p: ops.sum_all(ops.mul(ops.softmax_rows(p[0]), p[0]))),
        ("layer_norm_vec", [Tensor(rng.normal(size=5) * 2.0, requires_grad=True), gain, bias],
         lambda p: ops.sum_all(ops.mul(ops.layer_norm(p[0], p[1], p[2]),
                                       ops.layer_norm(p[0], p[1], p[2])))),
        ("layer_norm_rows", [Tensor(rng.normal(size=(3, 5)) * 2.0, requires_grad=True), gain, bias],
         lambda p: ops.mean_all(ops.gelu(ops.layer_norm(p[0], p[1], p[2])))),
        ("group_norm", [Tensor(rng.normal(size=(4, 3)) * 2.0, requires_grad=True), g4, b4],
         lambda p: ops.mean_all(ops.gelu(ops.group_norm(p[0], 2, p[1], p[2])))),
        ("depthwise_conv1d", [t(rng, 3, 6), t(rng, 3, 3), t(rng, 3)],
         lambda p: ops.mean_all(ops.gelu(ops.depthwise_conv1d(p[0], p[1], p[2])))),
    ]


_CASE_NAMES = [name for name, _, _ in _fd_cases(np.random.default_rng(0))]


@pytest.mark.parametrize("case", _CASE_NAMES)
def test_gradients_match_finite_differences(case):
    rng = np.random.default_rng(hash(case) % 2**32)
    for _ in range(N_INSTANCES):
        by_name = {name: (params, f) for name, params, f in _fd_cases(rng)}
        params, f = by_name[case]
        assert finite_diff_check(f, params, eps=FD_EPS) < FD_TOL, case
