"""Sliding-window feature extraction.

Per window and per channel this module computes time-domain statistics
(MAV or RMS, zero crossings, slope sign changes, waveform length), log
band-magnitude spectral components, and autoregressive coefficients, and
concatenates the per-channel blocks into one feature vector per window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from emgauth import _kernels
from emgauth.dataset import TrialRecording

FEATURE_KINDS = ("td", "fdt", "ar", "td+fdt", "td+ar")
TD_STATS = ("mav", "rms")
TD_BLOCK_DIM = 4  # MAV|RMS, ZC, SSC, WL


class FeatureError(Exception):
    """A feature specification is invalid or a recording cannot be windowed."""


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class WindowSpec:
    """Window length and step in milliseconds (200 ms / 50 ms step default)."""

    window_ms: float = 200.0
    step_ms: float = 50.0

    def __post_init__(self):
        if not self.window_ms > 0 or not self.step_ms > 0:
            raise FeatureError("window_ms and step_ms must be positive")
        if self.window_ms < self.step_ms:
            raise FeatureError("window_ms must be >= step_ms")

    def window_samples(self, sampling_rate_hz: float) -> int:
        w = _round_half_away(self.window_ms * sampling_rate_hz / 1000.0)
        if w < 1:
            raise FeatureError(f"window of {self.window_ms} ms is under one sample")
        return w

    def step_samples(self, sampling_rate_hz: float) -> int:
        s = _round_half_away(self.step_ms * sampling_rate_hz / 1000.0)
        if s < 1:
            raise FeatureError(f"step of {self.step_ms} ms is under one sample")
        return s


def default_fdt_bands(count: int = 6, low_hz: float = 10.0,
                      high_hz: float = 500.0) -> tuple[tuple[float, float], ...]:
    """Equal-width half-open frequency bands spanning [low_hz, high_hz)."""
    if count < 1:
        raise FeatureError("band count must be >= 1")
    edges = np.linspace(low_hz, high_hz, count + 1)
    return tuple((float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))


@dataclass(frozen=True)
class FeatureSpec:
    """Which per-channel feature block to compute and its parameters."""

    kind: str = "td"
    td_stat: str = "mav"
    td_threshold: float = 0.0
    fdt_bands: tuple[tuple[float, float], ...] = field(default_factory=default_fdt_bands)
    fdt_floor: float = 1e-12
    ar_order: int = 6

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise FeatureError(f"unknown feature kind '{self.kind}' (expected {FEATURE_KINDS})")
        if self.td_stat not in TD_STATS:
            raise FeatureError(f"unknown td_stat '{self.td_stat}' (expected {TD_STATS})")
        if self.td_threshold < 0:
            raise FeatureError("td_threshold must be >= 0")
        bands = tuple((float(lo), float(hi)) for lo, hi in self.fdt_bands)
        object.__setattr__(self, "fdt_bands", bands)
        prev_hi = 0.0
        for lo, hi in bands:
            if lo < 0 or hi <= lo:
                raise FeatureError(f"invalid band ({lo}, {hi})")
            if lo < prev_hi:
                raise FeatureError("bands must be ascending and non-overlapping")
            prev_hi = hi
        if not bands:
            raise FeatureError("at least one band is required")
        if not self.fdt_floor > 0:
            raise FeatureError("fdt_floor must be positive")
        if self.ar_order < 1:
            raise FeatureError("ar_order must be >= 1")

    @property
    def uses_td(self) -> bool:
        return self.kind in ("td", "td+fdt", "td+ar")

    @property
    def uses_fdt(self) -> bool:
        return self.kind in ("fdt", "td+fdt")

    @property
    def uses_ar(self) -> bool:
        return self.kind in ("ar", "td+ar")

    @property
    def per_channel_dim(self) -> int:
        dim = 0
        if self.uses_td:
            dim += TD_BLOCK_DIM
        if self.uses_fdt:
            dim += len(self.fdt_bands)
        if self.uses_ar:
            dim += self.ar_order
        return dim

    def validate_for(self, sampling_rate_hz: float, window_samples: int) -> None:
        if self.uses_fdt:
            nyquist = sampling_rate_hz / 2.0
            for lo, hi in self.fdt_bands:
                if hi > nyquist:
                    raise FeatureError(
                        f"band ({lo}, {hi}) exceeds the Nyquist frequency {nyquist}"
                    )
        if self.uses_ar and window_samples <= 2 * self.ar_order:
            raise FeatureError(
                f"window of {window_samples} samples too short for AR order {self.ar_order}"
            )


@dataclass(frozen=True)
class FeatureMatrix:
    """One feature vector per window plus the provenance of the extraction."""

    values: np.ndarray  # (n_windows, dim)
    participant: str
    gesture: str
    trial_index: int
    channel_ids: tuple[int, ...]
    feature_spec: FeatureSpec
    window_spec: WindowSpec

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# Single-window features
# ---------------------------------------------------------------------------

def mav(x) -> float:
    """Mean absolute value of a window."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise FeatureError("window must be non-empty")
    return float(np.mean(np.abs(x)))


def rms(x) -> float:
    """Root mean square of a window."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise FeatureError("window must be non-empty")
    return float(np.sqrt(np.mean(x * x)))


def ssc(x, threshold: float = 0.0) -> int:
    """Slope sign changes: interior points where the two adjacent slopes
    multiply to at least the threshold."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 3:
        raise FeatureError("ssc needs a window of at least 3 samples")
    prod = (x[1:-1] - x[:-2]) * (x[1:-1] - x[2:])
    return int(np.sum(prod >= threshold))


def wl(x) -> float:
    """Waveform length: sum of absolute successive differences."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise FeatureError("wl needs a window of at least 2 samples")
    return float(np.sum(np.abs(np.diff(x))))


def zc(x, threshold: float = 0.0) -> int:
    """Zero crossings: sign changes whose amplitude step clears the threshold."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise FeatureError("zc needs a window of at least 2 samples")
    return int(np.sum((x[:-1] * x[1:] < 0.0) & (np.abs(x[:-1] - x[1:]) >= threshold)))


def fdt(x, bands, floor: float, sampling_rate_hz: float) -> np.ndarray:
    """Log of the summed one-sided DFT magnitudes within each band.

    Component i is ln(floor + sum of |X(f)| over the bins with frequency in
    the half-open interval [low_i, high_i)). The raw segment is transformed,
    with no taper applied.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise FeatureError("fdt expects a non-empty 1-D window")
    return _fdt_block(x[None, :], tuple(bands), floor, sampling_rate_hz)[0]


def ar_coeffs(x, order: int = 6) -> tuple[np.ndarray, bool]:
    """Autoregressive coefficients of a window by the Burg recursion.

    Returns (coefficients, degenerate). Coefficients follow the prediction
    convention x[i] = sum_p a[p] x[i-p] + noise. A constant or zero window is
    degenerate and yields a zero vector with the flag set.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise FeatureError("ar_coeffs expects a 1-D window")
    if x.size <= 2 * order:
        raise FeatureError(f"window of {x.size} samples too short for order {order}")
    coeffs, degenerate = _kernels.burg_block(x[None, :], order)
    return coeffs[0], bool(degenerate[0])


# ---------------------------------------------------------------------------
# Windowing and full extraction
# ---------------------------------------------------------------------------

def window_signal(rec: TrialRecording, wspec: WindowSpec,
                  sampling_rate_hz: float) -> np.ndarray:
    """All windows of a recording as an (n_windows, window_len, n_channels)
    array; window k covers samples [k*step, k*step + window_len)."""
    w = wspec.window_samples(sampling_rate_hz)
    s = wspec.step_samples(sampling_rate_hz)
    if rec.n_samples < w:
        raise FeatureError(
            f"recording ({rec.participant}, {rec.gesture}, trial {rec.trial_index}) "
            f"has {rec.n_samples} samples, shorter than one {w}-sample window"
        )
    view = np.lib.stride_tricks.sliding_window_view(rec.samples, w, axis=0)[::s]
    return np.moveaxis(view, 1, 2)  # (n_windows, w, channels)


def _fdt_block(windows: np.ndarray, bands, floor: float, fs: float) -> np.ndarray:
    w = windows.shape[1]
    freqs = np.arange(w // 2 + 1) * (fs / w)
    mask = np.stack([(freqs >= lo) & (freqs < hi) for lo, hi in bands])
    mags = np.abs(np.fft.rfft(windows, axis=1))
    return np.log(floor + mags @ mask.T.astype(np.float64))


def _channel_blocks(rec: TrialRecording, fspec: FeatureSpec, wspec: WindowSpec,
                    sampling_rate_hz: float) -> np.ndarray:
    """Per-channel feature tensor of shape (n_windows, n_channels, block_dim)."""
    w = wspec.window_samples(sampling_rate_hz)
    fspec.validate_for(sampling_rate_hz, w)
    windows = window_signal(rec, wspec, sampling_rate_hz)  # (n_win, w, C)
    n_win, _, n_ch = windows.shape
    block = fspec.per_channel_dim
    out = np.empty((n_win, n_ch, block), dtype=np.float64)
    for c in range(n_ch):
        xc = np.ascontiguousarray(windows[:, :, c])
        col = 0
        if fspec.uses_td:
            out[:, c, col:col + TD_BLOCK_DIM] = _kernels.td_block(
                xc, fspec.td_threshold, fspec.td_stat == "rms")
            col += TD_BLOCK_DIM
        if fspec.uses_fdt:
            n_bands = len(fspec.fdt_bands)
            out[:, c, col:col + n_bands] = _fdt_block(
                xc, fspec.fdt_bands, fspec.fdt_floor, sampling_rate_hz)
            col += n_bands
        if fspec.uses_ar:
            out[:, c, col:col + fspec.ar_order] = _kernels.burg_block(
                xc, fspec.ar_order)[0]
    return out


def extract_features(rec: TrialRecording, fspec: FeatureSpec, wspec: WindowSpec,
                     sampling_rate_hz: float) -> FeatureMatrix:
    """Feature matrix of a recording: one row per window, channel blocks
    concatenated in channel order."""
    tensor = _channel_blocks(rec, fspec, wspec, sampling_rate_hz)
    n_win, n_ch, block = tensor.shape
    if rec.channel_ids is None:
        ids = tuple(range(n_ch))
    else:
        ids = rec.channel_ids
    return FeatureMatrix(
        values=tensor.reshape(n_win, n_ch * block),
        participant=rec.participant,
        gesture=rec.gesture,
        trial_index=rec.trial_index,
        channel_ids=ids,
        feature_spec=fspec,
        window_spec=wspec,
    )


def write_feature_csv(path, matrices) -> None:
    """Debug export: participant,gesture,trial,window,f0..f{D-1} rows."""
    matrices = list(matrices)
    if not matrices:
        raise FeatureError("nothing to export")
    dim = matrices[0].dim
    with open(path, "w") as fh:
        cols = ",".join(f"f{i}" for i in range(dim))
        fh.write(f"participant,gesture,trial,window,{cols}\n")
        for m in matrices:
            if m.dim != dim:
                raise FeatureError("feature matrices have mixed dimensions")
            for k, row in enumerate(m.values):
                vals = ",".join(repr(float(v)) for v in row)
                fh.write(f"{m.participant},{m.gesture},{m.trial_index},{k},{vals}\n")
