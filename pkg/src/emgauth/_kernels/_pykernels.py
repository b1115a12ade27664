"""Pure-numpy implementations of the hot per-window kernels.

This is the fallback backend used when the compiled extension is not
available. Both backends implement the same two entry points with identical
semantics; the compiled one is just faster on large window batches.
"""

from __future__ import annotations

import numpy as np

_DEGENERATE_EPS = 0.0  # a window is degenerate iff all samples are equal


def td_block(windows: np.ndarray, threshold: float, use_rms: bool) -> np.ndarray:
    """Time-domain feature block for a batch of single-channel windows.

    windows has shape (n_windows, window_len); the result has shape
    (n_windows, 4) with columns [MAV or RMS, ZC, SSC, WL].
    """
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] < 3:
        raise ValueError("windows must be 2-D with at least 3 samples per window")
    d = np.diff(w, axis=1)
    if use_rms:
        amp = np.sqrt(np.mean(w * w, axis=1))
    else:
        amp = np.mean(np.abs(w), axis=1)
    zc = np.sum((w[:, :-1] * w[:, 1:] < 0.0) & (np.abs(d) >= threshold), axis=1)
    ssc = np.sum(
        (w[:, 1:-1] - w[:, :-2]) * (w[:, 1:-1] - w[:, 2:]) >= threshold, axis=1
    )
    wl = np.sum(np.abs(d), axis=1)
    out = np.empty((w.shape[0], 4), dtype=np.float64)
    out[:, 0] = amp
    out[:, 1] = zc
    out[:, 2] = ssc
    out[:, 3] = wl
    return out


def burg_block(windows: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Autoregressive coefficients for a batch of windows via Burg recursion.

    Returns (coeffs, degenerate) where coeffs has shape (n_windows, order) in
    the prediction convention x[i] = sum_p a[p] * x[i-p] + noise, and
    degenerate marks constant/zero windows (their coefficient rows are zero).
    The recursion keeps every reflection coefficient in [-1, 1], so the
    estimated predictor is always stable.
    """
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("windows must be 2-D")
    n_win, n = w.shape
    if order < 1:
        raise ValueError("order must be >= 1")
    if n <= 2 * order:
        raise ValueError(f"window of {n} samples too short for order {order}")

    degenerate = np.ptp(w, axis=1) <= _DEGENERATE_EPS
    f = w.copy()
    b = w.copy()
    # a holds the monic polynomial [1, a1, ..., am] per window
    a = np.zeros((n_win, order + 1), dtype=np.float64)
    a[:, 0] = 1.0
    for m in range(1, order + 1):
        fs = f[:, m:]
        bs = b[:, m - 1 : n - 1]
        den = np.sum(fs * fs, axis=1) + np.sum(bs * bs, axis=1)
        num = -2.0 * np.sum(fs * bs, axis=1)
        k = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
        prev = a[:, : m + 1].copy()
        a[:, 1 : m + 1] = prev[:, 1 : m + 1] + k[:, None] * prev[:, m - 1 :: -1]
        kc = k[:, None]
        new_f = fs + kc * bs
        new_b = bs + kc * fs  # fs/bs are views, so build both before writing back
        f[:, m:] = new_f
        b[:, m:] = new_b
    coeffs = -a[:, 1:]
    coeffs[degenerate] = 0.0
    return coeffs, degenerate
