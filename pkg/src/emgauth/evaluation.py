"""Verification and identification evaluation over the leave-one-out schedule.

Verification builds genuine/impostor score sets for three threat scenarios
(the authentication gesture secret, compromised, or forgotten), sweeps the
accept threshold to a DET curve, and summarizes it as EER and AUC.
Identification ranks all enrolled users by model score and reports rank-k
errors and the CMC curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from emgauth.dataset import DatasetMeta
from emgauth.features import FeatureSpec, WindowSpec, _channel_blocks
from emgauth.model import (
    DEFAULT_LAMBDA,
    fit_class_model,
    loo_schedule,
    mahalanobis_scores,
)

SCENARIOS = ("normal", "leaked", "self")


class EvaluationError(Exception):
    """Evaluation cannot proceed (missing model, empty score pool, bad input)."""


@dataclass(frozen=True)
class ScoreSet:
    """Labeled genuine/impostor scores for one verification cell."""

    scenario: str
    auth_gesture: str
    claimed_user: str
    genuine: np.ndarray
    impostor: np.ndarray


@dataclass(frozen=True)
class DetCurve:
    """Threshold-ordered detection error tradeoff curve (accept iff score <= t)."""

    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray
    eer: float
    auc: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist()))


@dataclass(frozen=True)
class IdentificationResult:
    """Probes with their full user rankings, ascending by score."""

    probes: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]

    @property
    def n_users(self) -> int:
        return len(self.probes[0][1]) if self.probes else 0


@dataclass(frozen=True)
class CmcCurve:
    """Rank-k error for k = 1..U; non-increasing with zero at k = U."""

    rank_errors: dict[int, float]


def build_verification_scores(models, probes, scenario: str, auth_gesture: str,
                              claimed_user: str, *,
                              normal_includes_auth_gesture: bool = False,
                              median_over_windows: bool = False) -> ScoreSet:
    """Score the held-out probe windows for one (gesture, user) claim.

    `models` maps (gesture, user) to a ClassModel and `probes` maps
    (gesture, user) to that cell's held-out feature rows. Genuine scores come
    from the claimed user performing the authentication gesture; the impostor
    pool depends on the scenario:

    - normal: other users performing other gestures (the impostor does not
      know the gesture; a flag adds the authentication gesture to the pool)
    - leaked: other users performing the authentication gesture
    - self: the claimed user performing other gestures

    By default every window is one score; median_over_windows collapses each
    probe cell to its median score instead (a coarser trial-level view).
    """
    if scenario not in SCENARIOS:
        raise EvaluationError(f"unknown scenario '{scenario}' (expected {SCENARIOS})")
    key = (auth_gesture, claimed_user)
    if key not in models:
        raise EvaluationError(f"no model for gesture={auth_gesture}, user={claimed_user}")
    if key not in probes:
        raise EvaluationError(f"no probe windows for gesture={auth_gesture}, user={claimed_user}")
    model = models[key]

    def cell_scores(cell):
        scores = mahalanobis_scores(model, probes[cell])
        if median_over_windows and scores.size:
            return np.array([np.median(scores)])
        return scores

    genuine = cell_scores(key)
    impostor_parts = []
    for g, u in sorted(probes.keys()):
        if (g, u) == key:
            continue
        if scenario == "leaked":
            include = g == auth_gesture and u != claimed_user
        elif scenario == "self":
            include = g != auth_gesture and u == claimed_user
        else:
            include = u != claimed_user and (g != auth_gesture or normal_includes_auth_gesture)
        if include:
            impostor_parts.append(cell_scores((g, u)))
    if genuine.size == 0:
        raise EvaluationError(
            f"empty genuine pool for gesture={auth_gesture}, user={claimed_user}")
    if not impostor_parts:
        raise EvaluationError(
            f"empty impostor pool for scenario={scenario}, gesture={auth_gesture}, "
            f"user={claimed_user}")
    return ScoreSet(scenario, auth_gesture, claimed_user, genuine,
                    np.concatenate(impostor_parts))


# ---------------------------------------------------------------------------
# DET curve, EER, AUC
# ---------------------------------------------------------------------------

def _sweep(genuine: np.ndarray, impostor: np.ndarray):
    gen = np.sort(genuine)
    imp = np.sort(impostor)
    thresholds = np.concatenate(
        [[-np.inf], np.unique(np.concatenate([gen, imp])), [np.inf]])
    far = np.searchsorted(imp, thresholds, side="right") / imp.size
    frr = (gen.size - np.searchsorted(gen, thresholds, side="right")) / gen.size
    return thresholds, far, frr


def _eer_from(far: np.ndarray, frr: np.ndarray) -> float:
    diff = far - frr  # non-decreasing along the threshold sweep
    exact = np.nonzero(diff == 0.0)[0]
    if exact.size:
        return float(far[exact[0]])
    i = int(np.searchsorted(diff > 0, True)) - 1  # diff[i] < 0 < diff[i+1]
    f1, f2 = far[i], far[i + 1]
    r1, r2 = frr[i], frr[i + 1]
    alpha = (r1 - f1) / ((f2 - f1) - (r2 - r1))
    return float(f1 + alpha * (f2 - f1))


def _auc_from(far: np.ndarray, frr: np.ndarray) -> float:
    # Lower envelope: for each attained FAR keep the smallest FRR, then
    # integrate FRR over FAR by the trapezoid rule.
    rev_unique, rev_first = np.unique(far[::-1], return_index=True)
    last = far.size - 1 - rev_first
    return float(np.trapezoid(frr[last], rev_unique))


def det_curve(scores: ScoreSet) -> DetCurve:
    """Full DET sweep of a score set, with every breakpoint included."""
    genuine = np.asarray(scores.genuine, dtype=np.float64)
    impostor = np.asarray(scores.impostor, dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise EvaluationError("both score lists must be non-empty")
    if not (np.isfinite(genuine).all() and np.isfinite(impostor).all()):
        raise EvaluationError("scores must be finite")
    thresholds, far, frr = _sweep(genuine, impostor)
    return DetCurve(thresholds, far, frr, _eer_from(far, frr), _auc_from(far, frr))


def eer(curve: DetCurve) -> float:
    """Equal error rate: the FAR = FRR operating point of the curve, linearly
    interpolated between breakpoints when no exact crossing exists."""
    return _eer_from(curve.far, curve.frr)


def auc(curve: DetCurve) -> float:
    """Area under the DET curve (FRR integrated over FAR); lower is better."""
    return _auc_from(curve.far, curve.frr)


# ---------------------------------------------------------------------------
# Identification
# ---------------------------------------------------------------------------

def identify(models, probe) -> list[tuple[str, float]]:
    """Rank enrolled users for one probe window, ascending by model score;
    ties fall back to user identifier order. `models` maps user to the
    ClassModel of the performed gesture."""
    users = sorted(models.keys())
    if len(users) < 2:
        raise EvaluationError("identification needs at least 2 enrolled users")
    scores = np.array([mahalanobis_scores(models[u], np.atleast_2d(probe))[0]
                       for u in users])
    order = np.argsort(scores, kind="stable")
    return [(users[i], float(scores[i])) for i in order]


def rank_k_error(result: IdentificationResult, k: int) -> float:
    """Fraction of probes whose true user is absent from ranks 1..k."""
    n_users = result.n_users
    if not result.probes:
        raise EvaluationError("identification result is empty")
    if not 1 <= k <= n_users:
        raise EvaluationError(f"rank {k} out of range 1..{n_users}")
    misses = 0
    for true_user, ranking in result.probes:
        if all(user != true_user for user, _ in ranking[:k]):
            misses += 1
    return misses / len(result.probes)


def cmc(result: IdentificationResult) -> CmcCurve:
    """Cumulative match characteristic: rank-k error for every k."""
    if not result.probes:
        raise EvaluationError("identification result is empty")
    n_users = result.n_users
    ranks = np.empty(len(result.probes), dtype=np.int64)
    for i, (true_user, ranking) in enumerate(result.probes):
        ranks[i] = next(pos for pos, (user, _) in enumerate(ranking, start=1)
                        if user == true_user)
    return CmcCurve({k: float(np.mean(ranks > k)) for k in range(1, n_users + 1)})


# ---------------------------------------------------------------------------
# Full evaluation over the LOO schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quartiles:
    med: float
    q1: float
    q3: float

    @classmethod
    def of(cls, values) -> "Quartiles":
        med, q1, q3 = np.percentile(np.asarray(values, dtype=np.float64),
                                    [50, 25, 75], method="linear")
        return cls(float(med), float(q1), float(q3))

    def as_dict(self) -> dict:
        return {"med": self.med, "q1": self.q1, "q3": self.q3}


@dataclass
class ScenarioResult:
    scenario: str
    per_participant: dict[str, tuple[float, float]]  # participant -> (eer, auc)
    eer: Quartiles
    auc: Quartiles
    pooled_curve: DetCurve


@dataclass
class IdentificationReport:
    ranks: tuple[int, ...]
    per_participant: dict[str, dict[int, float]]
    summary: dict[int, Quartiles]
    cmc: CmcCurve


@dataclass
class EvalReport:
    feature_spec: FeatureSpec
    window_spec: WindowSpec
    channels: tuple[int, ...]
    lam: float
    scenarios: dict[str, ScenarioResult]
    identification: IdentificationReport | None
    fold_verification: list[tuple]    # (participant, gesture, fold, scenario, eer, auc)
    fold_identification: list[tuple]  # (participant, gesture, fold, {k: error})
    warnings: list[str] = field(default_factory=list)

    def summary_dict(self) -> dict:
        doc = {
            "feature_set": self.feature_spec.kind,
            "channels": list(self.channels),
            "dim": self.feature_spec.per_channel_dim * len(self.channels),
            "lambda": self.lam,
        }
        for name, res in self.scenarios.items():
            doc[name] = {"eer": res.eer.as_dict(), "auc": res.auc.as_dict()}
        if self.identification is not None:
            doc["identification"] = {
                f"r{k}e": q.as_dict() for k, q in self.identification.summary.items()
            }
        return doc


def compute_trial_features(meta: DatasetMeta, recordings, feature_spec: FeatureSpec,
                           window_spec: WindowSpec) -> dict:
    """Per-trial, per-channel feature tensors keyed (participant, gesture,
    trial). Computed once over all channels so channel subsets are cheap
    column selections; shared across evaluate() calls and selection runs."""
    out = {}
    for rec in recordings:
        key = (rec.participant, rec.gesture, rec.trial_index)
        if key in out:
            raise EvaluationError(f"duplicate trial {key}")
        out[key] = _channel_blocks(rec, feature_spec, window_spec,
                                   meta.sampling_rate_hz)
    return out


def _subset_matrix(tensor: np.ndarray, channels: tuple[int, ...]) -> np.ndarray:
    n_win = tensor.shape[0]
    return np.ascontiguousarray(tensor[:, channels, :]).reshape(n_win, -1)


def evaluate(meta: DatasetMeta, recordings, feature_spec: FeatureSpec | None = None,
             window_spec: WindowSpec | None = None, channel_set=None,
             lam: float = DEFAULT_LAMBDA, scenarios=SCENARIOS, ranks=(1, 5),
             normal_includes_auth_gesture: bool = False,
             median_over_windows: bool = False,
             trial_features: dict | None = None) -> EvalReport:
    """Run the full pipeline: per LOO fold fit one model per (gesture, user)
    on the training trials, score the held-out trial's windows for every
    verification scenario and for identification, then pool scores per
    participant across folds and gestures and report median/Q1/Q3 across
    participants. Deterministic for fixed inputs.
    """
    feature_spec = FeatureSpec() if feature_spec is None else feature_spec
    window_spec = WindowSpec() if window_spec is None else window_spec
    users = sorted(meta.participant_ids)
    gestures = list(meta.gesture_ids)
    if len(users) < 2:
        raise EvaluationError("evaluation needs at least 2 participants")
    for s in scenarios:
        if s not in SCENARIOS:
            raise EvaluationError(f"unknown scenario '{s}'")

    if channel_set is None:
        channels = tuple(range(meta.channel_count))
    else:
        channels = tuple(int(c) for c in channel_set)
        if not channels or any(b <= a for a, b in zip(channels, channels[1:])):
            raise EvaluationError("channel set must be non-empty and strictly increasing")
        if channels[0] < 0 or channels[-1] >= meta.channel_count:
            raise EvaluationError(f"channel index out of range: {channels}")

    if trial_features is None:
        trial_features = compute_trial_features(meta, recordings, feature_spec, window_spec)
    matrix = {key: _subset_matrix(t, channels) for key, t in trial_features.items()}
    for u in users:
        for g in gestures:
            for t in range(meta.trials_per_gesture):
                if (u, g, t) not in matrix:
                    raise EvaluationError(f"missing trial ({u}, {g}, {t})")

    warnings: list[str] = []
    ranks = tuple(sorted(set(int(k) for k in ranks)))
    usable_ranks = tuple(k for k in ranks if 1 <= k <= len(users))
    if usable_ranks != ranks:
        dropped = sorted(set(ranks) - set(usable_ranks))
        warnings.append(f"ranks {dropped} out of range for {len(users)} users; dropped")

    pooled_gen: dict[tuple[str, str], list] = {(s, u): [] for s in scenarios for u in users}
    pooled_imp: dict[tuple[str, str], list] = {(s, u): [] for s in scenarios for u in users}
    fold_verification: list[tuple] = []
    fold_identification: list[tuple] = []
    probes_by_user: dict[str, list] = {u: [] for u in users}
    scenario_skips: dict[str, int] = {s: 0 for s in scenarios}

    for train_idx, test_idx in loo_schedule(meta.trials_per_gesture).folds:
        models = {}
        for g in gestures:
            for u in users:
                rows = np.vstack([matrix[(u, g, t)] for t in train_idx])
                models[(g, u)] = fit_class_model(rows, lam, gesture=g, user=u)
        probes = {(g, u): matrix[(u, g, test_idx)] for g in gestures for u in users}

        for g in gestures:
            for u in users:
                for s in scenarios:
                    try:
                        score_set = build_verification_scores(
                            models, probes, s, g, u,
                            normal_includes_auth_gesture=normal_includes_auth_gesture,
                            median_over_windows=median_over_windows)
                    except EvaluationError:
                        scenario_skips[s] += 1
                        continue
                    curve = det_curve(score_set)
                    fold_verification.append((u, g, test_idx, s, curve.eer, curve.auc))
                    pooled_gen[(s, u)].append(score_set.genuine)
                    pooled_imp[(s, u)].append(score_set.impostor)

            # identification within the performed gesture
            for u in users:
                cell = probes[(g, u)]
                scores = np.column_stack(
                    [mahalanobis_scores(models[(g, m)], cell) for m in users])
                order = np.argsort(scores, axis=1, kind="stable")
                cell_probes = []
                for w in range(scores.shape[0]):
                    ranking = tuple((users[j], float(scores[w, j])) for j in order[w])
                    cell_probes.append((u, ranking))
                probes_by_user[u].extend(cell_probes)
                if usable_ranks:
                    res = IdentificationResult(tuple(cell_probes))
                    fold_identification.append(
                        (u, g, test_idx, {k: rank_k_error(res, k) for k in usable_ranks}))

    for s, skipped in scenario_skips.items():
        if skipped:
            warnings.append(f"scenario {s}: {skipped} empty-pool cell(s) skipped")

    scenario_results: dict[str, ScenarioResult] = {}
    for s in scenarios:
        per_participant = {}
        all_gen, all_imp = [], []
        for u in users:
            if not pooled_gen[(s, u)] or not pooled_imp[(s, u)]:
                warnings.append(f"scenario {s}: participant {u} has no scores; excluded")
                continue
            genuine = np.concatenate(pooled_gen[(s, u)])
            impostor = np.concatenate(pooled_imp[(s, u)])
            curve = det_curve(ScoreSet(s, "*", u, genuine, impostor))
            per_participant[u] = (curve.eer, curve.auc)
            all_gen.append(genuine)
            all_imp.append(impostor)
        if not per_participant:
            warnings.append(f"scenario {s}: no participant produced scores; omitted")
            continue
        eers = [v[0] for v in per_participant.values()]
        aucs = [v[1] for v in per_participant.values()]
        pooled_curve = det_curve(ScoreSet(
            s, "*", "*", np.concatenate(all_gen), np.concatenate(all_imp)))
        scenario_results[s] = ScenarioResult(
            s, per_participant, Quartiles.of(eers), Quartiles.of(aucs), pooled_curve)

    identification = None
    if usable_ranks and all(probes_by_user[u] for u in users):
        per_participant_ranks = {}
        for u in users:
            res = IdentificationResult(tuple(probes_by_user[u]))
            per_participant_ranks[u] = {k: rank_k_error(res, k) for k in usable_ranks}
        summary = {
            k: Quartiles.of([per_participant_ranks[u][k] for u in users])
            for k in usable_ranks
        }
        overall = IdentificationResult(
            tuple(p for u in users for p in probes_by_user[u]))
        identification = IdentificationReport(
            usable_ranks, per_participant_ranks, summary, cmc(overall))

    return EvalReport(
        feature_spec=feature_spec, window_spec=window_spec, channels=channels,
        lam=lam, scenarios=scenario_results, identification=identification,
        fold_verification=fold_verification, fold_identification=fold_identification,
        warnings=warnings,
    )
