"""Greedy sequential forward channel selection.

Starting from an empty applied set, each iteration evaluates the full
pipeline once per remaining channel and keeps the channel whose inclusion
minimizes the chosen error metric (a verification EER or a rank-k error,
median across participants). The per-iteration spread between the best and
worst candidate, the error range, measures how much that channel slot
matters.
"""

from __future__ import annotations

from dataclasses import dataclass

from emgauth.dataset import DatasetMeta
from emgauth.evaluation import EvalReport, compute_trial_features, evaluate
from emgauth.features import FeatureSpec, WindowSpec
from emgauth.model import DEFAULT_LAMBDA

METRICS = ("eer", "r1e", "r5e")


class SelectionError(Exception):
    """Invalid selection configuration or an unusable evaluation result."""


@dataclass(frozen=True)
class SfsIteration:
    candidate_errors: dict[int, float]
    selected_channel: int
    selected_error: float
    error_range: float
    applied_set: tuple[int, ...]


@dataclass(frozen=True)
class SfsTrace:
    metric: str
    iterations: tuple[SfsIteration, ...]

    @property
    def selected_order(self) -> tuple[int, ...]:
        return tuple(it.selected_channel for it in self.iterations)


def error_range(candidate_errors) -> float:
    """Spread of an iteration's candidate errors: max minus min."""
    values = list(candidate_errors.values()) if isinstance(candidate_errors, dict) \
        else list(candidate_errors)
    if not values:
        raise SelectionError("error_range needs at least one candidate")
    return float(max(values) - min(values))


def _metric_value(report: EvalReport, metric: str, scenario: str) -> float:
    if metric == "eer":
        if scenario not in report.scenarios:
            raise SelectionError(f"scenario '{scenario}' produced no scores")
        return report.scenarios[scenario].eer.med
    k = int(metric[1:-1])
    ident = report.identification
    if ident is None or k not in ident.summary:
        raise SelectionError(f"metric '{metric}' unavailable for this dataset")
    return ident.summary[k].med


def sfs(meta: DatasetMeta, recordings, feature_spec: FeatureSpec | None = None,
        window_spec: WindowSpec | None = None, metric: str = "eer",
        scenario: str = "leaked", lam: float = DEFAULT_LAMBDA,
        normal_includes_auth_gesture: bool = False) -> SfsTrace:
    """Run forward selection over all channels of the dataset.

    Ties between candidates break toward the lowest channel index, making
    the trace deterministic. Per-channel feature tensors are computed once
    and shared across candidate evaluations.
    """
    if metric not in METRICS:
        raise SelectionError(f"unknown metric '{metric}' (expected {METRICS})")
    feature_spec = FeatureSpec() if feature_spec is None else feature_spec
    window_spec = WindowSpec() if window_spec is None else window_spec
    ranks = (1, 5) if metric == "eer" else (int(metric[1:-1]),)
    scenarios = (scenario,) if metric == "eer" else ("leaked",)

    trial_features = compute_trial_features(meta, recordings, feature_spec, window_spec)
    applied: list[int] = []
    remaining = list(range(meta.channel_count))
    iterations = []
    while remaining:
        candidate_errors: dict[int, float] = {}
        for r in remaining:
            channels = tuple(sorted(applied + [r]))
            report = evaluate(
                meta, recordings, feature_spec, window_spec, channels, lam,
                scenarios=scenarios, ranks=ranks,
                normal_includes_auth_gesture=normal_includes_auth_gesture,
                trial_features=trial_features)
            candidate_errors[r] = _metric_value(report, metric, scenario)
        best = min(remaining, key=lambda r: (candidate_errors[r], r))
        applied.append(best)
        remaining.remove(best)
        iterations.append(SfsIteration(
            candidate_errors=candidate_errors,
            selected_channel=best,
            selected_error=candidate_errors[best],
            error_range=error_range(candidate_errors),
            applied_set=tuple(sorted(applied)),
        ))
    label = f"{metric}:{scenario}" if metric == "eer" else metric
    return SfsTrace(metric=label, iterations=tuple(iterations))
