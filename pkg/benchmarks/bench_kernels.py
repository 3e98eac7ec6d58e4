#!/usr/bin/env python3
"""Compare the depthwise-convolution backends (numba JIT vs plain numpy).

The conv kernels are the only hot loops with a compiled path; everything else
is vectorized numpy either way.  Run:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --channels 544 --positions 81 --repeats 200

The backend used by the package at import time follows POSELIFT_KERNELS
(auto/numba/numpy); this script imports both implementations directly so a
single run reports both columns.
"""

import argparse
import statistics
import time

import numpy as np

from poselift.kernels import backend_name
from poselift.kernels import numpy_backend

try:
    from poselift.kernels import numba_backend
except ImportError:  # pragma: no cover - numba genuinely absent
    numba_backend = None


def bench(fn, args, repeats: int) -> float:
    fn(*args)  # warm-up (JIT compile, cache touch)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--channels", type=int, default=544,
                        help="rows of the (C, P) input slab")
    parser.add_argument("--positions", type=int, default=81,
                        help="columns of the (C, P) input slab")
    parser.add_argument("--kernel", type=int, default=5, help="odd tap count")
    parser.add_argument("--repeats", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    x = rng.normal(size=(args.channels, args.positions))
    kernel = rng.normal(size=(args.channels, args.kernel))
    bias = rng.normal(size=args.channels)
    g = rng.normal(size=x.shape)

    cases = [
        ("dw_conv", (x, kernel, bias)),
        ("dw_conv_kernel_grad", (x, g, args.kernel)),
    ]
    backends = [("numpy", numpy_backend)]
    if numba_backend is not None:
        backends.append(("numba", numba_backend))

    print(f"input ({args.channels}, {args.positions}), kernel width {args.kernel}, "
          f"median of {args.repeats} runs; package default backend: {backend_name()}")
    header = f"{'op':<22}" + "".join(f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for op, op_args in cases:
        row = f"{op:<22}"
        medians = []
        for _, mod in backends:
            med = bench(getattr(mod, op), op_args, args.repeats)
            medians.append(med)
            row += f"{med * 1e6:>10.1f}us"
        if len(medians) == 2:
            row += f"{medians[0] / medians[1]:>9.1f}x"
        print(row)

    # sanity: both backends agree to float64 roundoff
    if numba_backend is not None:
        for op, op_args in cases:
            a = getattr(numpy_backend, op)(*op_args)
            b = getattr(numba_backend, op)(*op_args)
            assert np.abs(a - b).max() < 1e-12, op
        print("backends agree to < 1e-12")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
