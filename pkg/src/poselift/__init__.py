"""poselift: 2D-to-3D human pose lifting on a self-contained autodiff core."""

from . import ops  # noqa: F401  (attaches Tensor operator sugar)
from .autograd import Tensor, backward, finite_diff_check, no_grad
from .model import ModelConfig, forward, init_params, param_count, predict

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "backward",
    "finite_diff_check",
    "no_grad",
    "ModelConfig",
    "forward",
    "init_params",
    "param_count",
    "predict",
    "__version__",
]
