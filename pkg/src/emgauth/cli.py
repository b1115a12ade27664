"""Command-line front end.

Subcommands: synth (write a seeded synthetic dataset), validate (check a
dataset directory), eval (full verification/identification evaluation), and
sfs (greedy channel selection). Options can come from a JSON config file via
--config; explicit flags win. Every run writes a resolved_config.json into
the output directory, and re-running from that file reproduces the outputs
byte for byte.

Exit codes: 0 success, 1 validation failure, 2 computation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from emgauth.dataset import (
    DatasetError,
    SynthSpec,
    load_dataset,
    save_dataset,
    scan_dataset,
    synth_dataset,
    validate_dataset,
)
from emgauth.evaluation import SCENARIOS, evaluate
from emgauth.features import FeatureError, FeatureSpec, WindowSpec, default_fdt_bands
from emgauth.model import ModelError
from emgauth.selection import METRICS, SelectionError, sfs


class ConfigError(Exception):
    """A flag or config-file value failed validation."""


_VALIDATION_ERRORS = (ConfigError, DatasetError, FeatureError, ModelError)

_PIPELINE_DEFAULTS = {
    "dataset": None,
    "out": None,
    "features": "td",
    "td_stat": "mav",
    "td_threshold": 0.0,
    "fdt_bands": "6",
    "fdt_floor": 1e-12,
    "ar_order": 6,
    "window_ms": 200.0,
    "step_ms": 50.0,
    "channels": "all",
    "lambda": 0.001,
    "ranks": "1,5",
    "normal_inclusive": False,
    "median_windows": False,
}

_EVAL_DEFAULTS = dict(_PIPELINE_DEFAULTS, scenario="normal,leaked,self")
_SFS_DEFAULTS = dict(_PIPELINE_DEFAULTS, scenario="leaked", metric="eer")

_SYNTH_DEFAULTS = {
    "out": None,
    "users": 6,
    "gestures": 4,
    "trials": 7,
    "channels": 8,
    "duration_s": 5.0,
    "rate": 2048.0,
    "seed": 0,
    "separation": 1.0,
    "format": "csv",
}


def _merge_config(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags; unknown config keys error."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {config_path} must hold a JSON object")
        for key, value in doc.items():
            if key not in defaults:
                raise ConfigError(f"config {config_path}: unknown key '{key}'")
            merged[key] = value
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _parse_channels(text, channel_count: int):
    if isinstance(text, list):
        channels = tuple(int(c) for c in text)
    else:
        text = str(text).strip()
        if text == "all":
            return tuple(range(channel_count))
        try:
            channels = tuple(int(p) for p in text.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad channel list '{text}'") from exc
    if not channels or any(b <= a for a, b in zip(channels, channels[1:])):
        raise ConfigError(f"channels must be strictly increasing, got {list(channels)}")
    if channels[0] < 0 or channels[-1] >= channel_count:
        raise ConfigError(
            f"channel index out of range for {channel_count}-channel dataset")
    return channels


def _parse_bands(text):
    if isinstance(text, list):
        return tuple((float(lo), float(hi)) for lo, hi in text)
    text = str(text).strip()
    if ":" not in text:
        try:
            return default_fdt_bands(int(text))
        except ValueError as exc:
            raise ConfigError(f"bad band count '{text}'") from exc
    bands = []
    for part in text.split(","):
        try:
            lo, hi = part.split(":")
            bands.append((float(lo), float(hi)))
        except ValueError as exc:
            raise ConfigError(f"bad band '{part}' (expected low:high)") from exc
    return tuple(bands)


def _parse_scenarios(text):
    names = [s.strip() for s in str(text).split(",") if s.strip()]
    for s in names:
        if s not in SCENARIOS:
            raise ConfigError(f"unknown scenario '{s}' (expected {', '.join(SCENARIOS)})")
    if not names:
        raise ConfigError("at least one scenario is required")
    return tuple(names)


def _parse_ranks(text):
    if isinstance(text, list):
        return tuple(int(k) for k in text)
    try:
        ranks = tuple(int(p) for p in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"bad ranks list '{text}'") from exc
    if not ranks or any(k < 1 for k in ranks):
        raise ConfigError("ranks must be positive integers")
    return ranks


def _feature_spec(cfg: dict) -> FeatureSpec:
    try:
        return FeatureSpec(
            kind=str(cfg["features"]),
            td_stat=str(cfg["td_stat"]),
            td_threshold=float(cfg["td_threshold"]),
            fdt_bands=_parse_bands(cfg["fdt_bands"]),
            fdt_floor=float(cfg["fdt_floor"]),
            ar_order=int(cfg["ar_order"]),
        )
    except FeatureError as exc:
        raise ConfigError(str(exc)) from exc


def _window_spec(cfg: dict) -> WindowSpec:
    try:
        return WindowSpec(float(cfg["window_ms"]), float(cfg["step_ms"]))
    except FeatureError as exc:
        raise ConfigError(str(exc)) from exc


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _quartile_line(label: str, q) -> str:
    return f"  {label:<12} med={q.med:.4f}  q1={q.q1:.4f}  q3={q.q3:.4f}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        cfg = _merge_config(_SYNTH_DEFAULTS, args)
        if not cfg["out"]:
            raise ConfigError("--out is required")
        if cfg["format"] not in ("csv", "f32le"):
            raise ConfigError(f"unknown format '{cfg['format']}'")
        spec = SynthSpec(
            users=int(cfg["users"]), gestures=int(cfg["gestures"]),
            trials=int(cfg["trials"]), channels=int(cfg["channels"]),
            duration_s=float(cfg["duration_s"]),
            sampling_rate_hz=float(cfg["rate"]),
            seed=int(cfg["seed"]), separation=float(cfg["separation"]),
        )
        meta, recordings = synth_dataset(spec)  # raises for trials < 2
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        root = save_dataset(cfg["out"], meta, recordings, cfg["format"])
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(recordings)} recordings to {root}")
    print(f"  participants={spec.users} gestures={spec.gestures} "
          f"trials={spec.trials} channels={spec.channels}")
    print(f"  rate={spec.sampling_rate_hz} Hz duration={spec.duration_s} s "
          f"seed={spec.seed} separation={spec.separation} format={cfg['format']}")
    return 0


def cmd_validate(args) -> int:
    try:
        meta, recordings, scan_issues = scan_dataset(args.dataset)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = validate_dataset(meta, recordings)
    issues = scan_issues + report.issues
    if not issues:
        print("0 issues")
        return 0
    print(f"{len(issues)} issue(s):")
    for issue in issues:
        print(f"  [{issue.kind}] {issue.message}")
    return 1


def _load_pipeline_inputs(cfg: dict):
    if not cfg["dataset"]:
        raise ConfigError("--dataset is required")
    if not cfg["out"]:
        raise ConfigError("--out is required")
    meta, recordings = load_dataset(cfg["dataset"])
    fspec = _feature_spec(cfg)
    wspec = _window_spec(cfg)
    channels = _parse_channels(cfg["channels"], meta.channel_count)
    lam = float(cfg["lambda"])
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    return meta, recordings, fspec, wspec, channels, lam


def cmd_eval(args) -> int:
    try:
        cfg = _merge_config(_EVAL_DEFAULTS, args)
        meta, recordings, fspec, wspec, channels, lam = _load_pipeline_inputs(cfg)
        scenarios = _parse_scenarios(cfg["scenario"])
        ranks = _parse_ranks(cfg["ranks"])
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "resolved_config.json", cfg)
    try:
        report = evaluate(
            meta, recordings, fspec, wspec, channels, lam,
            scenarios=scenarios, ranks=ranks,
            normal_includes_auth_gesture=bool(cfg["normal_inclusive"]),
            median_over_windows=bool(cfg["median_windows"]))
        _write_eval_outputs(out, report)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.warnings:
        print(f"warning: {line}", file=sys.stderr)
    print(f"evaluation of {cfg['dataset']} "
          f"(features={fspec.kind}, channels={list(channels)}, dim={fspec.per_channel_dim * len(channels)})")
    for name, res in report.scenarios.items():
        print(_quartile_line(f"{name} eer", res.eer))
        print(_quartile_line(f"{name} auc", res.auc))
    if report.identification is not None:
        for k, q in report.identification.summary.items():
            print(_quartile_line(f"r{k}e", q))
    print(f"reports written to {out}")
    return 0


def _write_eval_outputs(out: Path, report) -> None:
    _write_json(out / "summary.json", report.summary_dict())
    for name, res in report.scenarios.items():
        curve = res.pooled_curve
        _write_csv(out / f"det_{name}.csv", "threshold,far,frr",
                   zip((float(t) for t in curve.thresholds),
                       (float(v) for v in curve.far),
                       (float(v) for v in curve.frr)))
    if report.identification is not None:
        _write_csv(out / "cmc.csv", "rank,error",
                   sorted((k, float(v)) for k, v in
                          report.identification.cmc.rank_errors.items()))
    _write_csv(out / "folds.csv", "participant,gesture,fold,scenario,eer,auc",
               ((p, g, f, s, float(e), float(a))
                for p, g, f, s, e, a in report.fold_verification))
    if report.fold_identification:
        ranks = sorted(report.fold_identification[0][3].keys())
        header = "participant,gesture,fold," + ",".join(f"r{k}e" for k in ranks)
        _write_csv(out / "folds_identification.csv", header,
                   ((p, g, f, *(float(errs[k]) for k in ranks))
                    for p, g, f, errs in report.fold_identification))


def cmd_sfs(args) -> int:
    try:
        cfg = _merge_config(_SFS_DEFAULTS, args)
        meta, recordings, fspec, wspec, channels, lam = _load_pipeline_inputs(cfg)
        if channels != tuple(range(meta.channel_count)):
            raise ConfigError("sfs searches all channels; do not pass --channels")
        metric = str(cfg["metric"])
        if metric not in METRICS:
            raise ConfigError(f"unknown metric '{metric}' (expected {', '.join(METRICS)})")
        scenario = str(cfg["scenario"])
        if metric == "eer" and scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario '{scenario}'")
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "resolved_config.json", cfg)
    try:
        trace = sfs(meta, recordings, fspec, wspec, metric=metric,
                    scenario=scenario, lam=lam,
                    normal_includes_auth_gesture=bool(cfg["normal_inclusive"]))
    except SelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = []
    for j, it in enumerate(trace.iterations, start=1):
        for channel in sorted(it.candidate_errors):
            rows.append((j, channel, float(it.candidate_errors[channel]),
                         1 if channel == it.selected_channel else 0,
                         float(it.error_range)))
    _write_csv(out / "sfs.csv", "iteration,candidate_channel,error,selected,range", rows)
    _write_json(out / "sfs_summary.json", {
        "metric": trace.metric,
        "selected_order": list(trace.selected_order),
        "selected_errors": [it.selected_error for it in trace.iterations],
        "error_ranges": [it.error_range for it in trace.iterations],
    })
    print(f"channel selection by {trace.metric}:")
    for j, it in enumerate(trace.iterations, start=1):
        print(f"  iteration {j}: channel {it.selected_channel} "
              f"error={it.selected_error:.4f} range={it.error_range:.4f}")
    print(f"selected order: {list(trace.selected_order)}")
    print(f"reports written to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="dataset root directory")
    p.add_argument("--out", help="output directory for reports")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--features", help="td | fdt | ar | td+fdt | td+ar")
    p.add_argument("--td-stat", dest="td_stat", help="mav | rms")
    p.add_argument("--td-threshold", dest="td_threshold", type=float,
                   help="threshold for ZC/SSC counts, in signal units")
    p.add_argument("--fdt-bands", dest="fdt_bands",
                   help="band count, or explicit low:high,low:high,... in Hz")
    p.add_argument("--fdt-floor", dest="fdt_floor", type=float)
    p.add_argument("--ar-order", dest="ar_order", type=int)
    p.add_argument("--window-ms", dest="window_ms", type=float)
    p.add_argument("--step-ms", dest="step_ms", type=float)
    p.add_argument("--channels", help="'all' or comma list of channel indices")
    p.add_argument("--lambda", dest="lambda", type=float,
                   help="covariance regularization strength")
    p.add_argument("--ranks", help="comma list of identification ranks")
    p.add_argument("--normal-inclusive", dest="normal_inclusive",
                   action="store_const", const=True,
                   help="include the authentication gesture in the normal-test impostor pool")
    p.add_argument("--median-windows", dest="median_windows",
                   action="store_const", const=True,
                   help="collapse each probe cell to its median window score "
                        "(trial-level verification view)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emgauth",
        description="sEMG biometric verification/identification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("--out", help="dataset directory to create")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--users", type=int)
    p.add_argument("--gestures", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--duration-s", dest="duration_s", type=float)
    p.add_argument("--rate", type=float, help="sampling rate in Hz")
    p.add_argument("--seed", type=int)
    p.add_argument("--separation", type=float,
                   help="how distinct the per-user signatures are (0 = identical)")
    p.add_argument("--format", choices=("csv", "f32le"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check a dataset directory")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="verification/identification evaluation")
    _add_pipeline_flags(p)
    p.add_argument("--scenario", help="comma subset of normal,leaked,self")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sfs", help="greedy forward channel selection")
    _add_pipeline_flags(p)
    p.add_argument("--metric", help="eer | r1e | r5e")
    p.add_argument("--scenario", help="scenario driving the eer metric")
    p.set_defaults(func=cmd_sfs)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
