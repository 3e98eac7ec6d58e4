"""Graph mechanics: recording, reachability, the backward sweep, FD checking."""

import numpy as np
import pytest

import poselift.ops as ops
from poselift.autograd import (Tensor, backward, finite_diff_check, finite_diff_errors,
                               grad_enabled, graph_size, no_grad)
from poselift.errors import NumericError, ShapeError


def test_tensor_basics():
    t = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
    assert t.shape == (2, 2)
    assert t.size == 4
    assert t.data.dtype == np.float64
    assert t.grad is None
    assert "requires_grad=True" in repr(t)
    with pytest.raises(ShapeError):
        t.item()
    assert Tensor(5.0).item() == 5.0


def test_constant_inputs_record_no_node():
    a = Tensor(np.ones((2, 2)))  # requires_grad=False
    out = ops.add(a, a)
    assert out.node is None
    assert not out.requires_grad


def test_square_gradient():
    # d(x*x)/dx = 2x = 6 at x = 3
    x = Tensor(np.array([[3.0]]), requires_grad=True)
    backward(ops.sum_all(ops.mul(x, x)))
    assert x.grad[0, 0] == pytest.approx(6.0, abs=1e-12)


def test_diamond_graph_accumulates():
    # y = x*x + x reuses x through two paths; grads must sum, 2x + 1 = 7
    x = Tensor(np.array([[3.0]]), requires_grad=True)
    y = ops.add(ops.mul(x, x), x)
    backward(ops.sum_all(y))
    assert x.grad[0, 0] == pytest.approx(7.0, abs=1e-12)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(ops.scalar_mul(x, 2.0))


def test_unused_leaf_gets_zero_grad():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    unused = Tensor(np.ones((4, 4)), requires_grad=True)
    backward(ops.sum_all(x), leaves=[x, unused])
    assert np.array_equal(x.grad, np.ones((2, 2)))
    assert np.array_equal(unused.grad, np.zeros((4, 4)))


def test_backward_overwrites_previous_grads():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    backward(ops.sum_all(ops.scalar_mul(x, 3.0)))
    first = x.grad.copy()
    backward(ops.sum_all(ops.scalar_mul(x, 5.0)))
    assert first[0, 0] == 3.0 and x.grad[0, 0] == 5.0


def test_no_grad_suppresses_recording():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    assert grad_enabled()
    with no_grad():
        assert not grad_enabled()
        out = ops.add(x, x)
        assert out.node is None and not out.requires_grad
    assert grad_enabled()


def test_no_grad_restores_on_exception():
    with pytest.raises(RuntimeError):
        with no_grad():
            raise RuntimeError("boom")
    assert grad_enabled()


def test_graph_size_counts_reachable_nodes():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    y = ops.add(ops.mul(x, x), x)  # mul + add
    assert graph_size(y) == 2
    assert graph_size(x) == 0


def test_matmul_grad_matches_finite_differences(rng):
    # loss = sum(A @ B): the [OP] backward contract at eps=1e-5, tol 1e-6
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)

    def f(params):
        return ops.sum_all(ops.matmul(params[0], params[1]))

    assert finite_diff_check(f, [a, b], eps=1e-5) < 1e-6


def test_finite_diff_quadratic_is_nearly_exact(rng):
    x = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    assert finite_diff_check(lambda p: ops.sum_all(ops.mul(p[0], p[0])), [x]) < 1e-9


def test_finite_diff_gelu_chain(rng):
    x = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 3)), requires_grad=True)

    def f(params):
        return ops.mean_all(ops.gelu(ops.matmul(params[0], params[1])))

    assert finite_diff_check(f, [x, w], eps=1e-5) < 1e-6


def test_finite_diff_constant_function_reports_zero():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    c = Tensor(np.zeros((2, 2)))

    def f(params):
        return ops.sum_all(ops.mul(params[0], c))  # identically 0

    errs = finite_diff_errors(f, [x])
    assert errs == [0.0]
    assert np.array_equal(x.grad, np.zeros((2, 2)))


def test_finite_diff_errors_one_entry_per_param(rng):
    a = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    errs = finite_diff_errors(lambda p: ops.sum_all(ops.mul(p[0], p[1])), [a, b])
    assert len(errs) == 2
    assert all(e < 1e-6 for e in errs)


def test_finite_diff_rejects_bad_eps(rng):
    x = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        finite_diff_check(lambda p: ops.sum_all(p[0]), [x], eps=0.0)


def test_finite_diff_rejects_non_scalar_function():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        finite_diff_check(lambda p: ops.scalar_mul(p[0], 1.0), [x])


def test_finite_diff_rejects_non_finite_loss():
    x = Tensor(np.array([[np.inf]]), requires_grad=True)
    with pytest.raises(NumericError):
        finite_diff_check(lambda p: ops.sum_all(p[0]), [x])


def test_finite_diff_restores_parameter_values(rng):
    x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    before = x.data.copy()
    finite_diff_check(lambda p: ops.sum_all(ops.gelu(p[0])), [x])
    assert np.array_equal(x.data, before)


def test_grad_flows_only_into_requires_grad_inputs(rng):
    a = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    frozen = Tensor(rng.normal(size=(2, 2)))
    backward(ops.sum_all(ops.mul(a, frozen)))
    assert a.grad is not None
    assert frozen.grad is None
