"""End-to-end gradient verification on a deliberately tiny model.

Analytic gradients of the full training loss are compared against central
finite differences for every parameter slot.  The evaluation point is chosen
for numerical conditioning, not realism:

* all trunk slots are jittered well away from the init (sigma 0.3), so
  normalization layers see O(1) variances instead of the near-degenerate
  scales of a fresh init (whose curvature ruins finite differences);
* the frame-collapse weights are centered on a uniform average;
* the head projection is scaled down so the loss is O(0.1), which keeps
  floating-point noise in the difference quotient far below the comparison
  floor for slots whose true gradient is structurally zero (e.g. attention
  key biases, which cancel inside the row softmax).

Each slot's error is the minimum over a small ladder of eps values: the
optimal central-difference step depends on local curvature, while a wrong
backward rule yields a large error at every step size, so the ladder cannot
hide real defects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import finite_diff_errors, graph_size
from .errors import ConfigError
from .model import ModelConfig, forward, init_params
from .training import mpjpe_loss

MAX_GRAPH_NODES = 100_000
DEFAULT_TOLERANCE = 1e-4
EPS_LADDER = (5e-5, 1e-4, 2e-4)


def tiny_config() -> ModelConfig:
    return ModelConfig(num_joints=3, frames=3, spatial_dim=4,
                       spatial_layers=1, temporal_layers=1, heads=2)


@dataclass
class GradcheckReport:
    per_slot: dict[str, float]
    max_error: float
    tolerance: float
    node_count: int
    passed: bool

    def worst_slots(self, n: int = 5) -> list[tuple[str, float]]:
        return sorted(self.per_slot.items(), key=lambda kv: kv[1], reverse=True)[:n]


def _evaluation_point(config: ModelConfig, rng: np.random.Generator):
    params = init_params(config, seed=rng.integers(2**32))
    for name, t in params.items():
        if name.startswith("head.proj"):
            t.data *= 0.25
            t.data += rng.normal(0.0, 0.005, size=t.data.shape)
        else:
            t.data += rng.normal(0.0, 0.3, size=t.data.shape)
    params["head.frame_weights"].data += 1.0 / config.frames
    win = rng.uniform(-1.0, 1.0, size=(config.frames, config.num_joints, 2))
    target = rng.normal(0.0, 0.02, size=(config.num_joints, 3))
    return params, win, target


def gradcheck(config: ModelConfig | None = None, seed: int = 0, eps: float | None = None,
              tolerance: float = DEFAULT_TOLERANCE) -> GradcheckReport:
    """Check every slot's gradient of the MPJPE loss on one random window.

    ``eps=None`` uses the default ladder; a float pins a single step size.
    """
    config = (config or tiny_config()).validate()
    ladder = EPS_LADDER if eps is None else (float(eps),)
    rng = np.random.default_rng(seed)
    params, win, target = _evaluation_point(config, rng)

    def loss_fn(_):
        return mpjpe_loss(forward(win, params, config), target)

    nodes = graph_size(loss_fn(None))
    if nodes > MAX_GRAPH_NODES:
        raise ConfigError(
            f"config builds a graph of {nodes} nodes (limit {MAX_GRAPH_NODES}); "
            "gradcheck is meant for tiny configs")

    names = list(params.keys())
    tensors = [params[n] for n in names]
    per_rung = [finite_diff_errors(loss_fn, tensors, eps=e) for e in ladder]
    per_slot = {name: min(errs[i] for errs in per_rung) for i, name in enumerate(names)}
    max_error = max(per_slot.values()) if per_slot else 0.0
    return GradcheckReport(
        per_slot=per_slot,
        max_error=max_error,
        tolerance=tolerance,
        node_count=nodes,
        passed=max_error < tolerance,
    )
