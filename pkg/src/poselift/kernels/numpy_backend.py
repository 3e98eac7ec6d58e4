"""Pure-numpy reference implementation of the conv inner loops."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def dw_conv(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Depthwise cross-correlation over the last axis, same zero padding.

    x: (C, P), kernels: (C, K) with K odd, bias: (C,) -> (C, P)
    """
    pad = kernels.shape[1] // 2
    xp = np.pad(x, ((0, 0), (pad, pad)))
    windows = sliding_window_view(xp, kernels.shape[1], axis=1)  # (C, P, K)
    return np.einsum("cpk,ck->cp", windows, kernels) + bias[:, None]


def dw_conv_kernel_grad(x: np.ndarray, grad_out: np.ndarray, ksize: int) -> np.ndarray:
    """Gradient of dw_conv w.r.t. the kernels: (C, K)."""
    pad = ksize // 2
    xp = np.pad(x, ((0, 0), (pad, pad)))
    windows = sliding_window_view(xp, ksize, axis=1)  # (C, P, K)
    return np.einsum("cpk,cp->ck", windows, grad_out)
