"""Per-(gesture, user) class models and Mahalanobis similarity scoring.

A class model is the centroid and regularized covariance of the training
feature vectors of one gesture performed by one user. The similarity score of
a probe vector is its Mahalanobis distance to the centroid; smaller means
more similar.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

DEFAULT_LAMBDA = 1e-3
_ABSOLUTE_FLOOR = 1e-12  # ridge when the covariance trace vanishes


class ModelError(Exception):
    """Invalid inputs to model fitting or scoring."""


class SingularCovarianceError(ModelError):
    """The regularized covariance of a class is numerically singular."""

    def __init__(self, gesture: str, user: str):
        super().__init__(
            f"covariance for class (gesture={gesture}, user={user}) is singular; "
            "fit with a positive regularization lambda"
        )
        self.gesture = gesture
        self.user = user


@dataclass(frozen=True)
class ClassModel:
    gesture: str
    user: str
    centroid: np.ndarray          # (D,)
    covariance: np.ndarray        # (D, D), unregularized sample covariance
    covariance_reg: np.ndarray    # (D, D), covariance + ridge
    precision: np.ndarray         # (D, D), inverse of covariance_reg
    training_window_count: int
    regularization_lambda: float

    @property
    def dim(self) -> int:
        return self.centroid.shape[0]


def fit_class_model(training, lam: float = DEFAULT_LAMBDA, *,
                    gesture: str | None = None, user: str | None = None) -> ClassModel:
    """Fit a class model from training windows (a FeatureMatrix or an array).

    The centroid is the row mean and the covariance the unbiased sample
    covariance, computed after sorting rows lexicographically so the result
    is bit-identical under any training-row permutation. Regularization adds
    lam * trace/D to the diagonal (falling back to an absolute ridge when the
    trace is zero); with lam = 0 a singular covariance raises
    SingularCovarianceError.
    """
    if hasattr(training, "values"):
        rows = training.values
        gesture = training.gesture if gesture is None else gesture
        user = training.participant if user is None else user
    else:
        rows = np.asarray(training, dtype=np.float64)
    gesture = "?" if gesture is None else gesture
    user = "?" if user is None else user
    if rows.ndim != 2:
        raise ModelError("training rows must form a 2-D matrix")
    n, d = rows.shape
    if n < 2:
        raise ModelError(f"need at least 2 training windows, got {n}")
    if lam < 0:
        raise ModelError("lambda must be >= 0")

    order = np.lexsort(rows.T[::-1])  # fixed summation order: sort rows first
    rows = np.ascontiguousarray(rows[order])
    centroid = rows.mean(axis=0)
    centered = rows - centroid
    cov = (centered.T @ centered) / (n - 1)
    cov = (cov + cov.T) / 2.0

    trace = float(np.trace(cov))
    if lam > 0:
        ridge = lam * trace / d if trace > 0 else max(lam, _ABSOLUTE_FLOOR)
    else:
        ridge = 0.0
    cov_reg = cov + ridge * np.eye(d)
    try:
        factor = cho_factor(cov_reg, lower=True)
        precision = cho_solve(factor, np.eye(d))
    except LinAlgError:
        raise SingularCovarianceError(gesture, user) from None
    precision = (precision + precision.T) / 2.0

    for arr in (centroid, cov, cov_reg, precision):
        arr.setflags(write=False)
    return ClassModel(
        gesture=gesture, user=user, centroid=centroid, covariance=cov,
        covariance_reg=cov_reg, precision=precision,
        training_window_count=n, regularization_lambda=lam,
    )


def mahalanobis_scores(model: ClassModel, probes) -> np.ndarray:
    """Similarity scores of a batch of probe rows against one class model."""
    p = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if p.shape[1] != model.dim:
        raise ModelError(f"probe dimension {p.shape[1]} != model dimension {model.dim}")
    centered = p - model.centroid
    quad = np.einsum("ij,ij->i", centered @ model.precision, centered)
    return np.sqrt(np.maximum(quad, 0.0))


def mahalanobis_score(model: ClassModel, probe) -> float:
    """Similarity score of one probe vector (0 iff the probe is the centroid)."""
    probe = np.asarray(probe, dtype=np.float64)
    if probe.ndim != 1:
        raise ModelError("probe must be a 1-D feature vector")
    return float(mahalanobis_scores(model, probe[None, :])[0])


@dataclass(frozen=True)
class LooSchedule:
    """Leave-one-trial-out folds: fold t trains on all trials except t."""

    folds: tuple[tuple[tuple[int, ...], int], ...]

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def loo_schedule(trial_count: int) -> LooSchedule:
    if trial_count < 2:
        raise ModelError(f"leave-one-out needs at least 2 trials, got {trial_count}")
    folds = tuple(
        (tuple(t for t in range(trial_count) if t != test), test)
        for test in range(trial_count)
    )
    return LooSchedule(folds)


# ---------------------------------------------------------------------------
# Binary model store
# ---------------------------------------------------------------------------

_MAGIC = b"EMGMDL01"


def save_model(model: ClassModel, path) -> None:
    """Write one class model as little-endian float64 payload with a short
    header; load_model round-trips it exactly."""
    g = model.gesture.encode("utf-8")
    u = model.user.encode("utf-8")
    payload = np.concatenate([
        [float(model.dim), model.regularization_lambda,
         float(model.training_window_count)],
        model.centroid,
        model.covariance_reg.reshape(-1),
    ]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(g)))
        fh.write(g)
        fh.write(struct.pack("<I", len(u)))
        fh.write(u)
        fh.write(payload.tobytes())


def load_model(path) -> ClassModel:
    """Read a model written by save_model; the precision matrix is rebuilt
    from the stored regularized covariance."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ModelError(f"{path}: not a model file")
        glen = struct.unpack("<I", fh.read(4))[0]
        gesture = fh.read(glen).decode("utf-8")
        ulen = struct.unpack("<I", fh.read(4))[0]
        user = fh.read(ulen).decode("utf-8")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    d = int(payload[0])
    lam = float(payload[1])
    count = int(payload[2])
    expected = 3 + d + d * d
    if payload.size != expected:
        raise ModelError(f"{path}: truncated payload ({payload.size} != {expected})")
    centroid = payload[3:3 + d].copy()
    cov_reg = payload[3 + d:].reshape(d, d).copy()
    try:
        precision = cho_solve(cho_factor(cov_reg, lower=True), np.eye(d))
    except LinAlgError:
        raise SingularCovarianceError(gesture, user) from None
    precision = (precision + precision.T) / 2.0
    for arr in (centroid, cov_reg, precision):
        arr.setflags(write=False)
    return ClassModel(
        gesture=gesture, user=user, centroid=centroid, covariance=cov_reg,
        covariance_reg=cov_reg, precision=precision,
        training_window_count=count, regularization_lambda=lam,
    )
