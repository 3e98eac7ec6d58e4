"""Numba-compiled conv inner loops; numerics match the numpy backend."""

import numpy as np
from numba import njit


@njit(cache=True)
def dw_conv(x, kernels, bias):
    C, P = x.shape
    K = kernels.shape[1]
    pad = K // 2
    out = np.empty((C, P))
    for c in range(C):
        for p in range(P):
            acc = bias[c]
            lo = max(0, p - pad)
            hi = min(P, p - pad + K)
            for q in range(lo, hi):
                acc += kernels[c, q - p + pad] * x[c, q]
            out[c, p] = acc
    return out


@njit(cache=True)
def dw_conv_kernel_grad(x, grad_out, ksize):
    C, P = x.shape
    pad = ksize // 2
    out = np.zeros((C, ksize))
    for c in range(C):
        for j in range(ksize):
            acc = 0.0
            lo = max(0, pad - j)
            hi = min(P, P + pad - j)
            for p in range(lo, hi):
                acc += grad_out[c, p] * x[c, p + j - pad]
            out[c, j] = acc
    return out
