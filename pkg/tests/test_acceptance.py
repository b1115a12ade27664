"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py -v` to see the lines as they
happen. Criterion 10 needs a real pre-converted dataset directory and is
skipped unless EMGAUTH_NINAPRO_ROOT points at one.
"""

import functools
import json
import math
import os
import time

import numpy as np
import pytest
from scipy.signal import lfilter

from emgauth.cli import main
from emgauth.dataset import SynthSpec, synth_dataset, load_dataset
from emgauth.evaluation import (
    ScoreSet,
    build_verification_scores,
    cmc,
    det_curve,
    evaluate,
)
from emgauth.features import (
    FeatureSpec,
    WindowSpec,
    ar_coeffs,
    default_fdt_bands,
    fdt,
    mav,
    rms,
    ssc,
    wl,
    zc,
)
from emgauth.model import fit_class_model, mahalanobis_score, mahalanobis_scores
from emgauth.selection import sfs


def criterion(number, name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except pytest.skip.Exception:
                print(f"\nACCEPTANCE {number:>2} {name}: SKIP")
                raise
            except BaseException:
                print(f"\nACCEPTANCE {number:>2} {name}: FAIL")
                raise
            print(f"\nACCEPTANCE {number:>2} {name}: PASS")
        return wrapper
    return deco


# ---------------------------------------------------------------------------
# 1. feature oracle suite
# ---------------------------------------------------------------------------

@criterion(1, "feature oracle suite")
def test_criterion_1_feature_oracles():
    started = time.monotonic()
    rng = np.random.default_rng(101)
    fs = 2048.0
    n, w = 1000, 256
    bands = default_fdt_bands()
    windows = rng.uniform(-1.0, 1.0, (n, w))
    # independent spectral oracle: explicit DFT matrix, no FFT
    k = np.arange(w // 2 + 1)
    dft = np.exp(-2j * np.pi * np.outer(k, np.arange(w)) / w)
    freqs = k * fs / w
    band_masks = [(freqs >= lo) & (freqs < hi) for lo, hi in bands]
    for x in windows:
        xs = x.tolist()
        assert mav(x) == pytest.approx(math.fsum(map(abs, xs)) / w, rel=1e-12)
        assert rms(x) == pytest.approx(
            math.sqrt(math.fsum(v * v for v in xs) / w), rel=1e-12)
        assert wl(x) == pytest.approx(
            math.fsum(abs(xs[i + 1] - xs[i]) for i in range(w - 1)), rel=1e-12)
        assert zc(x, 0.01) == sum(
            1 for i in range(w - 1)
            if xs[i] * xs[i + 1] < 0 and abs(xs[i] - xs[i + 1]) >= 0.01)
        assert ssc(x, 0.01) == sum(
            1 for i in range(1, w - 1)
            if (xs[i] - xs[i - 1]) * (xs[i] - xs[i + 1]) >= 0.01)
        mags = np.abs(dft @ x)
        expected = np.array([math.log(1e-12 + mags[m].sum()) for m in band_masks])
        assert np.allclose(fdt(x, bands, 1e-12, fs), expected, rtol=1e-9)
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"feature oracle suite took {elapsed:.1f} s"


# ---------------------------------------------------------------------------
# 2. autoregressive recovery
# ---------------------------------------------------------------------------

def _yule_walker(x, order):
    n = len(x)
    r = np.array([np.dot(x[: n - k], x[k:]) / n for k in range(order + 1)])
    toeplitz = np.array([[r[abs(i - j)] for j in range(order)] for i in range(order)])
    return np.linalg.solve(toeplitz, r[1:])


@criterion(2, "autoregressive recovery")
def test_criterion_2_ar_recovery():
    started = time.monotonic()
    for seed in range(20):
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(100_000 + 500)
        x = lfilter([1.0], [1.0, -0.5], noise)[500:]
        coeffs, degenerate = ar_coeffs(x, 6)
        assert not degenerate
        assert abs(coeffs[0] - 0.5) <= 0.05
        assert np.all(np.abs(coeffs[1:]) <= 0.05)
        assert np.all(np.abs(coeffs - _yule_walker(x, 6)) <= 0.02)
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"AR recovery took {elapsed:.1f} s"


# ---------------------------------------------------------------------------
# 3. Mahalanobis affine invariance
# ---------------------------------------------------------------------------

@criterion(3, "mahalanobis affine invariance")
def test_criterion_3_affine_invariance():
    rng = np.random.default_rng(17)
    for _ in range(50):
        d = int(rng.integers(2, 7))
        rows = rng.standard_normal((int(rng.integers(5 * d, 200)), d))
        probes = rng.standard_normal((25, d))
        a = rng.standard_normal((d, d))
        while np.linalg.cond(a) > 1e3:
            a = rng.standard_normal((d, d))
        b = rng.standard_normal(d)
        base = mahalanobis_scores(fit_class_model(rows, 0.0), probes)
        mapped = mahalanobis_scores(fit_class_model(rows @ a.T + b, 0.0),
                                    probes @ a.T + b)
        assert np.allclose(base, mapped, rtol=1e-6)

    from emgauth.model import ClassModel
    cov = np.diag([4.0, 1.0])
    model = ClassModel("g", "u", np.zeros(2), cov, cov, np.linalg.inv(cov), 2, 0.0)
    assert mahalanobis_score(model, [2.0, 3.0]) == pytest.approx(
        math.sqrt(10.0), rel=1e-12)
    assert mahalanobis_score(model, [0.0, 0.0]) == 0.0
    eye = ClassModel("g", "u", np.zeros(2), np.eye(2), np.eye(2), np.eye(2), 2, 0.0)
    assert mahalanobis_score(eye, [3.0, 4.0]) == pytest.approx(5.0, rel=1e-12)


# ---------------------------------------------------------------------------
# 4. EER / AUC against brute-force oracles
# ---------------------------------------------------------------------------

def _oracle_eer(genuine, impostor):
    ts = np.concatenate([[-np.inf], np.unique(np.concatenate([genuine, impostor])),
                         [np.inf]])
    far = (impostor[None, :] <= ts[:, None]).sum(axis=1) / impostor.size
    frr = (genuine[None, :] > ts[:, None]).sum(axis=1) / genuine.size
    for f, r in zip(far, frr):
        if f == r:
            return float(f)
    for i in range(len(ts) - 1):
        if far[i] - frr[i] < 0 < far[i + 1] - frr[i + 1]:
            alpha = (frr[i] - far[i]) / ((far[i + 1] - far[i]) - (frr[i + 1] - frr[i]))
            return float(far[i] + alpha * (far[i + 1] - far[i]))
    raise AssertionError("no crossing")


def _oracle_auc_dense(genuine, impostor, n_thresholds=100_000):
    lo = min(genuine.min(), impostor.min()) - 1.0
    hi = max(genuine.max(), impostor.max()) + 1.0
    ts = np.linspace(lo, hi, n_thresholds)
    far = (impostor[None, :] <= ts[:, None]).mean(axis=1)
    frr = (genuine[None, :] > ts[:, None]).mean(axis=1)
    order = np.argsort(far, kind="stable")
    far, frr = far[order], frr[order]
    far_u, start = np.unique(far, return_index=True)
    frr_env = np.minimum.reduceat(frr, start)
    return float(np.trapezoid(frr_env, far_u))


@criterion(4, "eer/auc oracle")
def test_criterion_4_eer_auc_oracle():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n_g = int(rng.integers(10, 80))
        n_i = int(rng.integers(10, 80))
        loc = rng.uniform(0.0, 2.0)
        genuine = rng.uniform(0.0, 3.0, n_g)
        impostor = rng.uniform(loc, loc + 3.0, n_i)
        curve = det_curve(ScoreSet("leaked", "g", "u", genuine, impostor))
        assert abs(curve.eer - _oracle_eer(genuine, impostor)) <= 1e-12
        assert abs(curve.auc - _oracle_auc_dense(genuine, impostor)) <= 1e-3

    perfect = det_curve(ScoreSet("leaked", "g", "u",
                                 rng.uniform(0, 1, 30), rng.uniform(2, 3, 30)))
    assert perfect.eer == 0.0
    assert perfect.auc == 0.0
    same = rng.uniform(0, 1, 40)
    identical = det_curve(ScoreSet("leaked", "g", "u", same, same.copy()))
    assert abs(identical.eer - 0.5) <= 1e-12


# ---------------------------------------------------------------------------
# 5. scenario pool counts
# ---------------------------------------------------------------------------

@criterion(5, "scenario pool counts")
def test_criterion_5_scenario_pools():
    rng = np.random.default_rng(29)
    users = [f"u{i}" for i in range(3)]
    gestures = [f"g{i}" for i in range(4)]
    n_windows, dim = 10, 3
    models, probes = {}, {}
    for g in gestures:
        for u in users:
            models[(g, u)] = fit_class_model(
                rng.standard_normal((15, dim)), 1e-3, gesture=g, user=u)
            probes[(g, u)] = rng.standard_normal((n_windows, dim))

    expected = {  # closed-form pool sizes for 3 users x 4 gestures x 10 windows
        "normal": (3 - 1) * (4 - 1) * n_windows,
        "leaked": (3 - 1) * n_windows,
        "self": (4 - 1) * n_windows,
    }
    for g in gestures:
        for u in users:
            for scenario, count in expected.items():
                built = build_verification_scores(models, probes, scenario, g, u)
                assert built.genuine.size == n_windows
                assert built.impostor.size == count
                # enumeration oracle over the scenario definition
                pool = []
                for go in gestures:
                    for uo in users:
                        if (go, uo) == (g, u):
                            continue
                        if scenario == "normal" and (uo != u and go != g):
                            pool.append((go, uo))
                        elif scenario == "leaked" and (uo != u and go == g):
                            pool.append((go, uo))
                        elif scenario == "self" and (uo == u and go != g):
                            pool.append((go, uo))
                oracle = np.sort(np.concatenate(
                    [mahalanobis_scores(models[(g, u)], probes[cell])
                     for cell in pool]))
                assert np.allclose(np.sort(built.impostor), oracle, rtol=1e-12)


# ---------------------------------------------------------------------------
# 6. end-to-end separability
# ---------------------------------------------------------------------------

@criterion(6, "end-to-end separability")
def test_criterion_6_end_to_end():
    started = time.monotonic()
    channels = (0, 1, 2, 3)

    meta, recs = synth_dataset(SynthSpec(users=6, gestures=4, trials=7, channels=8,
                                         duration_s=5.0, seed=42, separation=10.0))
    sharp = evaluate(meta, recs, FeatureSpec("td"), WindowSpec(), channels, 1e-3)
    assert sharp.scenarios["leaked"].eer.med < 0.01
    assert sharp.identification.summary[1].med < 0.01

    meta, recs = synth_dataset(SynthSpec(users=6, gestures=4, trials=7, channels=8,
                                         duration_s=5.0, seed=42, separation=0.0))
    flat = evaluate(meta, recs, FeatureSpec("td"), WindowSpec(), channels, 1e-3)
    assert 0.45 <= flat.scenarios["leaked"].eer.med <= 0.55
    chance = 1.0 - 1.0 / 6.0
    assert chance - 0.1 <= flat.identification.summary[1].med <= chance + 0.1

    elapsed = time.monotonic() - started
    assert elapsed < 120.0, f"end-to-end runs took {elapsed:.1f} s"


# ---------------------------------------------------------------------------
# 7. SFS against the exhaustive greedy oracle
# ---------------------------------------------------------------------------

@criterion(7, "sfs greedy oracle")
def test_criterion_7_sfs_oracle():
    fspec = FeatureSpec("td")
    wspec = WindowSpec(100.0, 50.0)
    meta, recs = synth_dataset(SynthSpec(users=5, gestures=2, trials=3, channels=3,
                                         duration_s=0.5, seed=21, separation=3.0))

    def metric_value(report, metric, scenario):
        if metric == "eer":
            return report.scenarios[scenario].eer.med
        return report.identification.summary[int(metric[1:-1])].med

    for metric, scenario in (("eer", "leaked"), ("eer", "normal"), ("eer", "self"),
                             ("r1e", "leaked"), ("r5e", "leaked")):
        trace = sfs(meta, recs, fspec, wspec, metric=metric, scenario=scenario)
        applied = []
        remaining = set(range(meta.channel_count))
        for it in trace.iterations:
            errors = {}
            for r in sorted(remaining):
                report = evaluate(meta, recs, fspec, wspec,
                                  tuple(sorted(applied + [r])), 1e-3,
                                  scenarios=(scenario,), ranks=(1, 5))
                errors[r] = metric_value(report, metric, scenario)
            best = min(sorted(remaining), key=lambda r: (errors[r], r))
            assert it.selected_channel == best
            assert it.candidate_errors == errors
            assert it.error_range == max(errors.values()) - min(errors.values())
            applied.append(best)
            remaining.remove(best)


# ---------------------------------------------------------------------------
# 8. monotonicity of every emitted curve
# ---------------------------------------------------------------------------

@criterion(8, "curve monotonicity")
def test_criterion_8_monotonicity(tiny_dataset):
    rng = np.random.default_rng(31)
    for _ in range(200):
        curve = det_curve(ScoreSet(
            "leaked", "g", "u",
            rng.uniform(0, 1, int(rng.integers(3, 60))),
            rng.uniform(0, 1, int(rng.integers(3, 60)))))
        assert (np.diff(curve.far) >= 0).all()
        assert (np.diff(curve.frr) <= 0).all()

    meta, recs = tiny_dataset
    report = evaluate(meta, recs, FeatureSpec("td"), WindowSpec(), None, 1e-3)
    for res in report.scenarios.values():
        assert (np.diff(res.pooled_curve.far) >= 0).all()
        assert (np.diff(res.pooled_curve.frr) <= 0).all()
    errors = [report.identification.cmc.rank_errors[k]
              for k in sorted(report.identification.cmc.rank_errors)]
    assert all(a >= b for a, b in zip(errors, errors[1:]))
    assert errors[-1] == 0.0


# ---------------------------------------------------------------------------
# 9. byte-identical reruns through the CLI
# ---------------------------------------------------------------------------

@criterion(9, "deterministic reruns")
def test_criterion_9_determinism(tmp_path):
    data = tmp_path / "ds"
    assert main(["synth", "--out", str(data), "--users", "3", "--gestures", "2",
                 "--trials", "3", "--channels", "2", "--duration-s", "0.5",
                 "--seed", "13", "--separation", "4.0"]) == 0

    def tree(root):
        return {str(p.relative_to(root)): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file()}

    for cmd, extra in (("eval", []), ("sfs", ["--metric", "eer"])):
        out_a, out_b = tmp_path / f"{cmd}_a", tmp_path / f"{cmd}_b"
        for out in (out_a, out_b):
            assert main([cmd, "--dataset", str(data), "--out", str(out)] + extra) == 0
        a, b = tree(out_a), tree(out_b)
        ca = json.loads(a.pop("resolved_config.json"))
        cb = json.loads(b.pop("resolved_config.json"))
        ca.pop("out"), cb.pop("out")
        assert ca == cb  # configs identical apart from the output directory
        assert a == b    # every report byte-identical


# ---------------------------------------------------------------------------
# 10. optional check against a real pre-converted dataset
# ---------------------------------------------------------------------------

@criterion(10, "reference dataset medians")
def test_criterion_10_reference_dataset():
    root = os.environ.get("EMGAUTH_NINAPRO_ROOT")
    if not root or not os.path.isdir(root):
        pytest.skip("EMGAUTH_NINAPRO_ROOT not set; reference check skipped")
    meta, recs = load_dataset(root)
    report = evaluate(meta, recs, FeatureSpec("td"), WindowSpec(), (0, 1, 2, 3), 1e-3)
    expected = {"normal": 0.064, "leaked": 0.068, "self": 0.235}
    for scenario, med in expected.items():
        assert abs(report.scenarios[scenario].eer.med - med) <= 0.05
    assert abs(report.identification.summary[1].med - 0.109) <= 0.05
