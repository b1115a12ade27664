"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--windows N] [--length W] [--repeats K]

Workload mirrors real extraction: batches of overlapping windows cut from an
autoregressive signal at 2048 Hz. Reports the median wall time per call and
the compiled/pure speedup for each kernel.
"""

import argparse
import statistics
import time

import numpy as np
from scipy.signal import lfilter

from emgauth._kernels import _pykernels

try:
    from emgauth._kernels import _ckernels
except ImportError:
    _ckernels = None


def make_windows(n_windows: int, window_len: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    signal = lfilter([1.0], [1.0, -0.6, 0.25], rng.standard_normal(
        n_windows * window_len // 4 + window_len))
    view = np.lib.stride_tricks.sliding_window_view(signal, window_len)
    idx = rng.integers(0, view.shape[0], n_windows)
    return np.ascontiguousarray(view[idx])


def timed(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--windows", type=int, default=5000)
    parser.add_argument("--length", type=int, default=410)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    windows = make_windows(args.windows, args.length)
    print(f"workload: {args.windows} windows x {args.length} samples, "
          f"median of {args.repeats} runs\n")

    cases = [
        ("td_block (mav)", lambda impl: impl.td_block(windows, 0.01, False)),
        ("td_block (rms)", lambda impl: impl.td_block(windows, 0.01, True)),
        ("burg_block p=6", lambda impl: impl.burg_block(windows, 6)),
    ]
    header = f"{'kernel':<18} {'pure (ms)':>10} {'compiled (ms)':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        pure = timed(lambda: call(_pykernels), args.repeats) * 1e3
        if _ckernels is None:
            print(f"{name:<18} {pure:>10.2f} {'n/a':>14} {'n/a':>8}")
            continue
        comp = timed(lambda: call(_ckernels), args.repeats) * 1e3
        # sanity: backends must agree on the same input
        a, b = call(_pykernels), call(_ckernels)
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        assert np.allclose(a, b, rtol=1e-8, atol=1e-10)
        print(f"{name:<18} {pure:>10.2f} {comp:>14.2f} {pure / comp:>7.1f}x")

    if _ckernels is None:
        print("\ncompiled backend unavailable; build with "
              "`python setup.py build_ext --inplace`")


if __name__ == "__main__":
    main()
