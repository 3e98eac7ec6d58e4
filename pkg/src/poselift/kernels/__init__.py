"""Hot inner-loop kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the POSELIFT_KERNELS
environment variable: "numba", "numpy", or "auto" (default — numba when it
imports, numpy otherwise).  Both backends are importable directly for
side-by-side testing and benchmarking.
"""

import os

from ..errors import ConfigError
from . import numpy_backend


def _pick():
    choice = os.environ.get("POSELIFT_KERNELS", "auto").strip().lower()
    if choice in ("", "auto"):
        try:
            from . import numba_backend
            return numba_backend, "numba"
        except ImportError:
            return numpy_backend, "numpy"
    if choice == "numpy":
        return numpy_backend, "numpy"
    if choice == "numba":
        from . import numba_backend
        return numba_backend, "numba"
    raise ConfigError(f"POSELIFT_KERNELS must be 'numba', 'numpy' or 'auto', got {choice!r}")


_impl, _name = _pick()

dw_conv = _impl.dw_conv
dw_conv_kernel_grad = _impl.dw_conv_kernel_grad


def backend_name() -> str:
    """Name of the active conv backend ("numba" or "numpy")."""
    return _name
