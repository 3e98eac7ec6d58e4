"""Reverse-mode automatic differentiation over dense float64 arrays.

The graph is define-by-run: every primitive op records a node holding
vector-Jacobian closures for those inputs that require gradients.  Nodes
carry a monotonically increasing sequence number, so creation order is a
topological order and the backward sweep is a single pass over reachable
nodes in reverse creation order, visiting each node exactly once.
"""

from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

_SEQ = itertools.count()


class _GradMode(threading.local):
    enabled = True


_MODE = _GradMode()


@contextlib.contextmanager
def no_grad():
    """Disable graph recording within the block (evaluation, finite differences)."""
    prev = _MODE.enabled
    _MODE.enabled = False
    try:
        yield
    finally:
        _MODE.enabled = prev


def grad_enabled() -> bool:
    return _MODE.enabled


class Tensor:
    """A dense float64 array plus autodiff bookkeeping.

    ``grad`` is populated by :func:`backward` and always matches ``data`` in
    shape.  Tensors with ``requires_grad=False`` never receive a gradient.
    """

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single-element tensor, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # Arithmetic sugar is attached by poselift.ops at import time so the op
    # implementations live in one module.


class Node:
    """One recorded primitive application."""

    __slots__ = ("op", "out", "edges", "seq")

    def __init__(self, op: str, out: Tensor, edges: Sequence[tuple[Tensor, Callable]]):
        self.op = op
        self.out = out
        self.edges = tuple(edges)
        self.seq = next(_SEQ)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def apply(op: str, data: np.ndarray, edges: Iterable[tuple[Tensor, Callable]]) -> Tensor:
    """Wrap an op result, recording vjp edges for inputs that require grad.

    Each edge is ``(input_tensor, vjp)`` where ``vjp`` maps the output
    gradient array to the gradient array for that input.
    """
    out = Tensor(data)
    if _MODE.enabled:
        live = [(t, fn) for t, fn in edges if t.requires_grad]
        if live:
            out.requires_grad = True
            out.node = Node(op, out, live)
    return out


def _reachable(root: Tensor) -> list[Node]:
    nodes: list[Node] = []
    seen: set[int] = set()
    stack = [root]
    while stack:
        node = stack.pop().node
        if node is None or id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        for parent, _ in node.edges:
            stack.append(parent)
    return nodes


def graph_size(root: Tensor) -> int:
    """Number of recorded nodes reachable from ``root``."""
    return len(_reachable(root))


def backward(loss: Tensor, leaves: Iterable[Tensor] = ()) -> None:
    """Accumulate gradients of a scalar ``loss`` into ``.grad`` fields.

    Every tensor reached by the sweep gets its gradient assigned (previous
    contents are overwritten, not accumulated across calls).  Tensors in
    ``leaves`` that the graph never touched get a zero gradient so callers
    can treat the result uniformly.
    """
    leaves = list(leaves)
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    carriers: dict[int, Tensor] = {id(loss): loss}

    for node in sorted(_reachable(loss), key=lambda n: n.seq, reverse=True):
        g = pending.pop(id(node.out), None)
        if g is None:  # pragma: no cover - reachable nodes always receive a gradient
            continue
        node.out.grad = g
        for parent, vjp in node.edges:
            contrib = vjp(g)
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + contrib
            else:
                pending[key] = contrib
                carriers[key] = parent

    for key, g in pending.items():
        carriers[key].grad = np.asarray(g, dtype=np.float64)

    for t in leaves:
        if id(t) not in pending and t is not loss:
            t.grad = np.zeros_like(t.data)


def _loss_value(f: Callable, params: Sequence[Tensor]) -> float:
    out = f(params)
    val = out.data if isinstance(out, Tensor) else np.asarray(out, dtype=np.float64)
    if val.size != 1:
        raise ShapeError(f"finite_diff_check requires a scalar-valued function, got shape {val.shape}")
    v = float(val.reshape(()))
    if not np.isfinite(v):
        raise NumericError("finite_diff_check: function returned a non-finite value")
    return v


def finite_diff_errors(f: Callable, params: Sequence[Tensor], eps: float = 1e-5) -> list[float]:
    """Per-parameter max relative error between reverse-mode and central differences.

    The error for one entry is ``|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)``;
    each parameter reports the max over its entries (0.0 for empty params).
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    params = list(params)
    loss = f(params)
    if not isinstance(loss, Tensor):
        raise TypeError("function under test must return a Tensor")
    _loss_value(lambda _: loss, params)  # scalar + finiteness check
    backward(loss, leaves=params)
    analytic = [np.array(p.grad, copy=True) for p in params]

    errors = []
    with no_grad():
        for p, g_ad in zip(params, analytic):
            worst = 0.0
            flat = p.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = _loss_value(f, params)
                flat[i] = orig - eps
                down = _loss_value(f, params)
                flat[i] = orig
                g_fd = (up - down) / (2.0 * eps)
                g = g_ad.reshape(-1)[i]
                worst = max(worst, abs(g - g_fd) / max(1e-8, abs(g) + abs(g_fd)))
            errors.append(worst)
    return errors


def finite_diff_check(f: Callable, params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Max relative disagreement between reverse-mode and central-difference grads."""
    errs = finite_diff_errors(f, params, eps=eps)
    return max(errs, default=0.0)
