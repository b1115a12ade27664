"""Canonical dataset model: metadata, trial recordings, disk layout, bipolar
derivation, channel selection, validation, and seeded synthetic generation.

A dataset on disk is a directory with a `meta.json` file and one data file per
(participant, gesture, trial). See README for the exact layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

DEFAULT_GESTURE_LABELS = (
    "LP", "TA", "TLFO", "TIFO", "TLFE", "TIFE", "IMFE", "LFE",
    "IFE", "TE", "WF", "WE", "FS", "FP", "HO", "HC",
)

DATA_FORMATS = ("csv", "f32le")


class DatasetError(Exception):
    """A dataset (on disk or in memory) is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class DatasetMeta:
    """Acquisition metadata shared by every recording of a dataset."""

    sampling_rate_hz: float
    participant_ids: tuple[str, ...]
    gesture_ids: tuple[str, ...]
    trials_per_gesture: int
    channel_count: int
    signal_units: str = "mV"

    def __post_init__(self):
        object.__setattr__(self, "participant_ids", tuple(self.participant_ids))
        object.__setattr__(self, "gesture_ids", tuple(self.gesture_ids))
        if not self.sampling_rate_hz > 0:
            raise DatasetError("sampling_rate_hz must be positive")
        if self.channel_count < 1:
            raise DatasetError("channel_count must be >= 1")
        if self.trials_per_gesture < 2:
            raise DatasetError("trials_per_gesture must be >= 2 (cross-validation needs 2)")
        if len(set(self.participant_ids)) != len(self.participant_ids):
            raise DatasetError("duplicate participant ids")
        if len(set(self.gesture_ids)) != len(self.gesture_ids):
            raise DatasetError("duplicate gesture ids")
        if not self.participant_ids or not self.gesture_ids:
            raise DatasetError("participant_ids and gesture_ids must be non-empty")


@dataclass(frozen=True)
class TrialRecording:
    """One multichannel trial, samples laid out (n_samples, n_channels).

    The sample matrix is frozen after construction; derived recordings
    (bipolar, channel subsets) are new objects. `channel_ids` records which
    source channels the columns came from (None means the native 0..C-1).
    """

    participant: str
    gesture: str
    trial_index: int
    samples: np.ndarray
    channel_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise DatasetError("samples must be a 2-D (n_samples, n_channels) matrix")
        if self.trial_index < 0:
            raise DatasetError("trial_index must be >= 0")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.channel_ids is not None:
            object.__setattr__(self, "channel_ids", tuple(self.channel_ids))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class BipolarPairing:
    """Ordered (proximal, distal) electrode index pairs for bipolar derivation."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(p), int(d)) for p, d in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise DatasetError("pairing must contain at least one pair")
        used: set[int] = set()
        for p, d in pairs:
            if p < 0 or d < 0:
                raise DatasetError(f"negative electrode index in pair ({p}, {d})")
            if p in used or d in used or p == d:
                raise DatasetError(f"electrode index reused in pair ({p}, {d})")
            used.update((p, d))

    @property
    def max_electrode(self) -> int:
        return max(max(p, d) for p, d in self.pairs)


def default_bipolar_pairing(n_electrodes: int = 16) -> BipolarPairing:
    """Pair electrode i with i + n/2, matching two stacked rings of electrodes."""
    if n_electrodes < 2 or n_electrodes % 2:
        raise DatasetError("default pairing needs an even electrode count >= 2")
    half = n_electrodes // 2
    return BipolarPairing(tuple((i, i + half) for i in range(half)))


def derive_bipolar(rec: TrialRecording, pairing: BipolarPairing) -> TrialRecording:
    """Differential recording: output column k = proximal[k] - distal[k]."""
    if pairing.max_electrode >= rec.n_channels:
        raise DatasetError(
            f"pairing references electrode {pairing.max_electrode} but recording "
            f"has {rec.n_channels} channels"
        )
    prox = [p for p, _ in pairing.pairs]
    dist = [d for _, d in pairing.pairs]
    out = rec.samples[:, prox] - rec.samples[:, dist]
    return TrialRecording(rec.participant, rec.gesture, rec.trial_index, out)


def select_channels(rec: TrialRecording, channel_set) -> TrialRecording:
    """Restrict a recording to the given strictly increasing channel indices."""
    channels = tuple(int(c) for c in channel_set)
    if not channels:
        raise DatasetError("channel set must not be empty")
    if any(b <= a for a, b in zip(channels, channels[1:])):
        raise DatasetError(f"channel set must be strictly increasing, got {channels}")
    if channels[0] < 0 or channels[-1] >= rec.n_channels:
        raise DatasetError(
            f"channel index out of range: {channels} for {rec.n_channels} channels"
        )
    if rec.channel_ids is None:
        ids = channels
    else:
        ids = tuple(rec.channel_ids[c] for c in channels)
    return TrialRecording(
        rec.participant, rec.gesture, rec.trial_index,
        np.ascontiguousarray(rec.samples[:, channels]), channel_ids=ids,
    )


# ---------------------------------------------------------------------------
# Disk layout
# ---------------------------------------------------------------------------

def _meta_path(root: Path) -> Path:
    return root / "meta.json"


def _trial_path(root: Path, participant: str, gesture: str, trial: int, fmt: str) -> Path:
    ext = "csv" if fmt == "csv" else "f32"
    return root / "data" / participant / gesture / f"{trial}.{ext}"


def _read_meta(root: Path) -> tuple[DatasetMeta, str]:
    path = _meta_path(root)
    if not path.is_file():
        raise DatasetError(f"{path}: metadata file not found")
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"{path}: unreadable metadata ({exc})") from exc
    required = ("sampling_rate_hz", "participants", "gestures",
                "trials_per_gesture", "channels", "units", "format")
    for key in required:
        if key not in raw:
            raise DatasetError(f"{path}: missing key '{key}'")
    fmt = raw["format"]
    if fmt not in DATA_FORMATS:
        raise DatasetError(f"{path}: unknown format '{fmt}' (expected one of {DATA_FORMATS})")
    try:
        meta = DatasetMeta(
            sampling_rate_hz=float(raw["sampling_rate_hz"]),
            participant_ids=tuple(str(p) for p in raw["participants"]),
            gesture_ids=tuple(str(g) for g in raw["gestures"]),
            trials_per_gesture=int(raw["trials_per_gesture"]),
            channel_count=int(raw["channels"]),
            signal_units=str(raw["units"]),
        )
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: invalid metadata ({exc})") from exc
    return meta, fmt


def _read_pairing(root: Path) -> BipolarPairing | None:
    path = root / "pairing.json"
    if not path.is_file():
        return None
    try:
        raw = json.loads(path.read_text())
        return BipolarPairing(tuple((int(p), int(d)) for p, d in raw))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: invalid pairing file ({exc})") from exc


def _read_trial_csv(path: Path, n_channels: int) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        expected = ",".join(f"ch{i}" for i in range(n_channels))
        if header != expected:
            raise DatasetError(f"{path}: header mismatch (expected '{expected}')")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise DatasetError(f"{path}: unparseable sample data ({exc})") from exc
    if data.size and data.shape[1] != n_channels:
        raise DatasetError(
            f"{path}: {data.shape[1]} columns, metadata declares {n_channels}"
        )
    if data.size == 0:
        data = data.reshape(0, n_channels)
    return data


def _read_trial_f32(path: Path, n_channels: int) -> np.ndarray:
    blob = path.read_bytes()
    row = 4 * n_channels
    if len(blob) % row:
        raise DatasetError(
            f"{path}: size {len(blob)} is not a multiple of {row} bytes per sample"
        )
    return np.frombuffer(blob, dtype="<f4").reshape(-1, n_channels).astype(np.float64)


def load_dataset(root_path) -> tuple[DatasetMeta, list[TrialRecording]]:
    """Load every declared trial from a canonical-layout directory.

    Applies `pairing.json` (bipolar derivation) when present; the returned
    metadata then reflects the derived channel count. Any missing file,
    column mismatch, or non-finite sample raises DatasetError naming the
    offending file.
    """
    root = Path(root_path)
    meta, fmt = _read_meta(root)
    pairing = _read_pairing(root)
    reader = _read_trial_csv if fmt == "csv" else _read_trial_f32
    recordings = []
    for participant in meta.participant_ids:
        for gesture in meta.gesture_ids:
            for trial in range(meta.trials_per_gesture):
                path = _trial_path(root, participant, gesture, trial, fmt)
                if not path.is_file():
                    raise DatasetError(
                        f"{path}: missing trial (participant={participant}, "
                        f"gesture={gesture}, trial={trial})"
                    )
                samples = reader(path, meta.channel_count)
                if not np.isfinite(samples).all():
                    bad = np.argwhere(~np.isfinite(samples))[0]
                    raise DatasetError(
                        f"{path}: non-finite sample at row {bad[0]}, channel {bad[1]}"
                    )
                rec = TrialRecording(participant, gesture, trial, samples)
                if pairing is not None:
                    rec = derive_bipolar(rec, pairing)
                recordings.append(rec)
    if pairing is not None:
        meta = DatasetMeta(
            meta.sampling_rate_hz, meta.participant_ids, meta.gesture_ids,
            meta.trials_per_gesture, len(pairing.pairs), meta.signal_units,
        )
    return meta, recordings


def scan_dataset(root_path) -> tuple[DatasetMeta, list[TrialRecording], list["ValidationIssue"]]:
    """Lenient load for validation: unparseable trial files become issues and
    are skipped, missing files are simply absent (validate_dataset flags
    them), and non-finite recordings are kept so the validator can locate
    the bad samples. Metadata problems still raise."""
    root = Path(root_path)
    meta, fmt = _read_meta(root)
    pairing = _read_pairing(root)
    reader = _read_trial_csv if fmt == "csv" else _read_trial_f32
    recordings = []
    issues = []
    for participant in meta.participant_ids:
        for gesture in meta.gesture_ids:
            for trial in range(meta.trials_per_gesture):
                path = _trial_path(root, participant, gesture, trial, fmt)
                if not path.is_file():
                    continue
                try:
                    samples = reader(path, meta.channel_count)
                    rec = TrialRecording(participant, gesture, trial, samples)
                    if pairing is not None:
                        rec = derive_bipolar(rec, pairing)
                except DatasetError as exc:
                    issues.append(ValidationIssue(
                        "unreadable", str(exc), participant, gesture, trial))
                    continue
                recordings.append(rec)
    if pairing is not None:
        meta = DatasetMeta(
            meta.sampling_rate_hz, meta.participant_ids, meta.gesture_ids,
            meta.trials_per_gesture, len(pairing.pairs), meta.signal_units,
        )
    return meta, recordings, issues


def save_dataset(root_path, meta: DatasetMeta, recordings, file_format: str = "csv") -> Path:
    """Write a dataset in the canonical layout. Returns the root path."""
    if file_format not in DATA_FORMATS:
        raise DatasetError(f"unknown format '{file_format}'")
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    meta_doc = {
        "sampling_rate_hz": meta.sampling_rate_hz,
        "participants": list(meta.participant_ids),
        "gestures": list(meta.gesture_ids),
        "trials_per_gesture": meta.trials_per_gesture,
        "channels": meta.channel_count,
        "units": meta.signal_units,
        "format": file_format,
    }
    _meta_path(root).write_text(json.dumps(meta_doc, indent=2, sort_keys=True) + "\n")
    header = ",".join(f"ch{i}" for i in range(meta.channel_count))
    for rec in recordings:
        if rec.n_channels != meta.channel_count:
            raise DatasetError(
                f"recording ({rec.participant}, {rec.gesture}, {rec.trial_index}) "
                f"has {rec.n_channels} channels, metadata declares {meta.channel_count}"
            )
        path = _trial_path(root, rec.participant, rec.gesture, rec.trial_index, file_format)
        path.parent.mkdir(parents=True, exist_ok=True)
        if file_format == "csv":
            np.savetxt(path, rec.samples, delimiter=",", fmt="%.12g",
                       header=header, comments="")
        else:
            path.write_bytes(rec.samples.astype("<f4").tobytes())
    return root


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    kind: str  # missing_trial | channel_mismatch | length_outlier | non_finite
    message: str
    participant: str | None = None
    gesture: str | None = None
    trial_index: int | None = None


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.issues

    def __str__(self) -> str:
        if self.is_clean:
            return "0 issues"
        lines = [f"{len(self.issues)} issue(s):"]
        lines += [f"  [{i.kind}] {i.message}" for i in self.issues]
        return "\n".join(lines)


def validate_dataset(meta: DatasetMeta, recordings) -> ValidationReport:
    """Report every pipeline-safety violation; an empty report means safe.

    Checks trial completeness against the metadata, channel counts, trial
    lengths more than 20% away from the median, and non-finite samples.
    """
    report = ValidationReport()
    present = {}
    for rec in recordings:
        present[(rec.participant, rec.gesture, rec.trial_index)] = rec
    for p in meta.participant_ids:
        for g in meta.gesture_ids:
            for t in range(meta.trials_per_gesture):
                if (p, g, t) not in present:
                    report.issues.append(ValidationIssue(
                        "missing_trial", f"trial {t} of ({p}, {g}) not present",
                        participant=p, gesture=g, trial_index=t,
                    ))
    lengths = [rec.n_samples for rec in recordings]
    median = float(np.median(lengths)) if lengths else 0.0
    for rec in recordings:
        where = f"({rec.participant}, {rec.gesture}, trial {rec.trial_index})"
        if rec.n_channels != meta.channel_count:
            report.issues.append(ValidationIssue(
                "channel_mismatch",
                f"{where} has {rec.n_channels} channels, expected {meta.channel_count}",
                rec.participant, rec.gesture, rec.trial_index,
            ))
        if median > 0 and abs(rec.n_samples - median) > 0.2 * median:
            report.issues.append(ValidationIssue(
                "length_outlier",
                f"{where} has {rec.n_samples} samples, median is {median:.0f}",
                rec.participant, rec.gesture, rec.trial_index,
            ))
        finite = np.isfinite(rec.samples)
        if not finite.all():
            row, col = np.argwhere(~finite)[0]
            report.issues.append(ValidationIssue(
                "non_finite",
                f"{where} has a non-finite value at sample {row}, channel {col}",
                rec.participant, rec.gesture, rec.trial_index,
            ))
    return report


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the seeded synthetic generator.

    `separation` scales how distinct the per-user signatures are: 0 makes all
    users identically distributed, larger values spread amplitude gains and
    pole locations further apart while shrinking trial-to-trial jitter.
    """

    users: int
    gestures: int
    trials: int
    channels: int
    duration_s: float = 5.0
    sampling_rate_hz: float = 2048.0
    seed: int = 0
    separation: float = 1.0

    def __post_init__(self):
        for name in ("users", "gestures", "trials", "channels"):
            if getattr(self, name) < 1:
                raise DatasetError(f"{name} must be >= 1")
        if not self.duration_s > 0:
            raise DatasetError("duration_s must be positive")
        if not self.sampling_rate_hz > 0:
            raise DatasetError("sampling_rate_hz must be positive")
        if self.separation < 0:
            raise DatasetError("separation must be >= 0")
        if self.seed < 0:
            raise DatasetError("seed must be an unsigned integer")


_AR_POLE_PAIRS = 3  # gives a 6th-order spectrum per channel
_AR_REDRAW_LIMIT = 16
_BURN_IN = 256

# Signature spread constants (log-gain units and Hz per unit separation).
_USER_LEVEL_SCALE = 0.05
_GAIN_DEV_SCALE = 0.03
_FREQ_DEV_HZ = 2.0
_RADIUS_DEV_SCALE = 0.004
_TRIAL_JITTER_BASE = 0.02


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _poles_to_prediction_coeffs(radii: np.ndarray, angles: np.ndarray) -> np.ndarray:
    roots = np.concatenate([
        radii * np.exp(1j * angles), radii * np.exp(-1j * angles),
    ])
    monic = np.poly(roots).real  # [1, c1, ..., c2m]
    return -monic[1:]


def _signature(spec: SynthSpec, user: int, gesture: int, channel: int):
    """Gain and AR coefficients for one (user, gesture, channel) class."""
    fs = spec.sampling_rate_hz
    base = _stream(spec.seed, 1, gesture, channel)
    gain = base.uniform(0.5, 2.0)
    radii = base.uniform(0.55, 0.85, _AR_POLE_PAIRS)
    freq_hi = min(450.0, 0.45 * fs)
    freqs = base.uniform(min(30.0, 0.4 * freq_hi), freq_hi, _AR_POLE_PAIRS)

    if spec.users > 1:
        level = np.linspace(-1.0, 1.0, spec.users)[user]
    else:
        level = 0.0
    dev = _stream(spec.seed, 2, user, gesture, channel)
    s = spec.separation
    log_gain = math.log(gain) + s * (_USER_LEVEL_SCALE * level
                                     + _GAIN_DEV_SCALE * dev.standard_normal())
    freqs = freqs + s * _FREQ_DEV_HZ * dev.standard_normal(_AR_POLE_PAIRS)
    radii = radii + s * _RADIUS_DEV_SCALE * dev.standard_normal(_AR_POLE_PAIRS)

    for attempt in range(_AR_REDRAW_LIMIT):
        r = np.clip(radii, 0.3, 0.95)
        f = np.clip(freqs, 10.0, 0.47 * fs)
        coeffs = _poles_to_prediction_coeffs(r, 2.0 * np.pi * f / fs)
        roots = np.roots(np.concatenate(([1.0], -coeffs)))
        if np.all(np.abs(roots) < 0.999):
            return math.exp(log_gain), coeffs
        radii = dev.uniform(0.55, 0.85, _AR_POLE_PAIRS)
        freqs = dev.uniform(30.0, freq_hi, _AR_POLE_PAIRS)
    raise DatasetError(
        f"could not draw a stable AR spectrum for (user={user}, gesture={gesture}, "
        f"channel={channel}) after {_AR_REDRAW_LIMIT} attempts"
    )


def synth_dataset(spec: SynthSpec) -> tuple[DatasetMeta, list[TrialRecording]]:
    """Deterministic synthetic dataset; a pure function of its spec.

    Every (user, gesture, channel) class gets its own amplitude gain and a
    stable 6th-order autoregressive spectrum drawn from the seed. Trials of a
    class differ by fresh innovation noise and a small multiplicative gain
    jitter that shrinks as separation grows. Samples are quantized to 32-bit
    float precision so binary round trips through disk are exact.
    """
    width = max(2, len(str(spec.users - 1)))
    participants = tuple(f"u{i:0{width}d}" for i in range(spec.users))
    gestures = tuple(
        DEFAULT_GESTURE_LABELS[i] if i < len(DEFAULT_GESTURE_LABELS) else f"G{i}"
        for i in range(spec.gestures)
    )
    meta = DatasetMeta(
        sampling_rate_hz=spec.sampling_rate_hz,
        participant_ids=participants,
        gesture_ids=gestures,
        trials_per_gesture=spec.trials,
        channel_count=spec.channels,
    )
    n = int(round(spec.duration_s * spec.sampling_rate_hz))
    jitter_sigma = _TRIAL_JITTER_BASE / (1.0 + spec.separation)

    signatures = {}
    for u in range(spec.users):
        for g in range(spec.gestures):
            for c in range(spec.channels):
                signatures[(u, g, c)] = _signature(spec, u, g, c)

    recordings = []
    for u, participant in enumerate(participants):
        for g, gesture in enumerate(gestures):
            for t in range(spec.trials):
                rng = _stream(spec.seed, 3, u, g, t)
                jitter = np.exp(jitter_sigma * rng.standard_normal(spec.channels))
                noise = rng.standard_normal((n + _BURN_IN, spec.channels))
                samples = np.empty((n, spec.channels), dtype=np.float64)
                for c in range(spec.channels):
                    gain, coeffs = signatures[(u, g, c)]
                    monic = np.concatenate(([1.0], -coeffs))
                    y = lfilter([1.0], monic, noise[:, c])[_BURN_IN:]
                    samples[:, c] = gain * jitter[c] * y
                samples = samples.astype(np.float32).astype(np.float64)
                recordings.append(TrialRecording(participant, gesture, t, samples))
    return meta, recordings
