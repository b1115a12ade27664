"""Forward channel selection against an independent greedy oracle."""

import numpy as np
import pytest

from emgauth.dataset import DatasetMeta, SynthSpec, TrialRecording, synth_dataset
from emgauth.evaluation import evaluate
from emgauth.features import FeatureSpec, WindowSpec
from emgauth.selection import SelectionError, error_range, sfs

FSPEC = FeatureSpec("td")
WSPEC = WindowSpec(100.0, 50.0)


@pytest.fixture(scope="module")
def toy():
    spec = SynthSpec(users=5, gestures=2, trials=3, channels=3,
                     duration_s=0.5, seed=21, separation=3.0)
    return synth_dataset(spec)


def oracle_greedy(meta, recs, metric, scenario):
    """Independent re-implementation: exhaustively evaluate every candidate at
    every iteration and take the lowest error, lowest channel index first."""
    applied = []
    remaining = set(range(meta.channel_count))
    picks = []
    while remaining:
        best = None
        errors = {}
        for r in sorted(remaining):
            chans = tuple(sorted(applied + [r]))
            report = evaluate(meta, recs, FSPEC, WSPEC, chans, 1e-3,
                              scenarios=(scenario,), ranks=(1, 5))
            if metric == "eer":
                errors[r] = report.scenarios[scenario].eer.med
            else:
                errors[r] = report.identification.summary[int(metric[1:-1])].med
            if best is None or errors[r] < errors[best]:
                best = r
        picks.append((best, errors))
        applied.append(best)
        remaining.remove(best)
    return picks


@pytest.mark.parametrize("metric,scenario", [
    ("eer", "leaked"), ("eer", "normal"), ("eer", "self"), ("r1e", "leaked"),
    ("r5e", "leaked"),
])
def test_trace_matches_exhaustive_oracle(toy, metric, scenario):
    meta, recs = toy
    trace = sfs(meta, recs, FSPEC, WSPEC, metric=metric, scenario=scenario)
    picks = oracle_greedy(meta, recs, metric, scenario)
    assert len(trace.iterations) == meta.channel_count
    for it, (channel, errors) in zip(trace.iterations, picks):
        assert it.selected_channel == channel
        assert it.candidate_errors == pytest.approx(errors, abs=1e-15)
        assert it.selected_error == errors[channel]
        assert it.error_range == pytest.approx(
            max(errors.values()) - min(errors.values()), abs=1e-15)


def test_trace_shape_invariants(toy):
    meta, recs = toy
    trace = sfs(meta, recs, FSPEC, WSPEC, metric="eer", scenario="leaked")
    n = meta.channel_count
    assert sorted(trace.selected_order) == list(range(n))
    for j, it in enumerate(trace.iterations, start=1):
        assert len(it.candidate_errors) == n - j + 1
        assert len(it.applied_set) == j
        assert it.error_range >= 0.0
        assert all(it.selected_error <= e for e in it.candidate_errors.values())
    assert trace.iterations[-1].applied_set == tuple(range(n))


def test_rerun_is_identical(toy):
    meta, recs = toy
    a = sfs(meta, recs, FSPEC, WSPEC, metric="eer", scenario="leaked")
    b = sfs(meta, recs, FSPEC, WSPEC, metric="eer", scenario="leaked")
    assert a == b


def test_single_channel_dataset():
    meta, recs = synth_dataset(SynthSpec(users=2, gestures=2, trials=2, channels=1,
                                         duration_s=0.5, seed=9, separation=2.0))
    trace = sfs(meta, recs, FSPEC, WSPEC, metric="eer", scenario="leaked")
    assert len(trace.iterations) == 1
    assert trace.iterations[0].error_range == 0.0
    assert trace.selected_order == (0,)


def test_informative_channel_selected_first():
    """Channel 1 carries all user-discriminative signal, channel 0 none."""
    flat_spec = SynthSpec(users=3, gestures=2, trials=3, channels=1,
                          duration_s=0.5, seed=33, separation=0.0)
    sharp_spec = SynthSpec(users=3, gestures=2, trials=3, channels=1,
                           duration_s=0.5, seed=34, separation=8.0)
    meta_flat, flat = synth_dataset(flat_spec)
    _, sharp = synth_dataset(sharp_spec)
    recs = [
        TrialRecording(a.participant, a.gesture, a.trial_index,
                       np.column_stack([a.samples[:, 0], b.samples[:, 0]]))
        for a, b in zip(flat, sharp)
    ]
    meta = DatasetMeta(meta_flat.sampling_rate_hz, meta_flat.participant_ids,
                       meta_flat.gesture_ids, meta_flat.trials_per_gesture, 2)
    trace = sfs(meta, recs, FSPEC, WSPEC, metric="eer", scenario="leaked")
    assert trace.selected_order[0] == 1


def test_error_range():
    assert error_range({0: 0.3, 1: 0.1, 2: 0.2}) == pytest.approx(0.2, abs=1e-15)
    assert error_range([0.42]) == 0.0
    rng = np.random.default_rng(8)
    values = rng.uniform(0, 1, 100).tolist()
    assert error_range(values) == pytest.approx(max(values) - min(values), rel=1e-12)
    with pytest.raises(SelectionError):
        error_range([])


def test_unknown_metric_rejected(toy):
    meta, recs = toy
    with pytest.raises(SelectionError):
        sfs(meta, recs, FSPEC, WSPEC, metric="accuracy")
