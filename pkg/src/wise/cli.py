"""Command-line front end: ``wise score | validate | simulate | replay``.

Exit codes: 0 ok/pass, 1 data error, 2 usage or configuration error,
3 at least one machine fails the selected threshold (``score`` only).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from wise import __version__, config, ingestion, pipeline, simulator, validation
from wise._accel import backend_name
from wise.errors import ConfigError, DataError, ScoringError, ValidationSetupError, WiseError
from wise.scoring import VARIANTS, ClassificationThresholds, MachineScoreReport

log = logging.getLogger("wise")

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2
EXIT_FAIL = 3

OVERRIDE_KEYS = ("tanh_overall", "tanh_resource", "exp_overall", "exp_resource")


class UsageError(ConfigError):
    pass


def _sha256(path: str) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise DataError(f"cannot read input: {exc.strerror or exc}", None, path) from None


def _variants(selection: str) -> list[str]:
    return list(VARIANTS) if selection == "all" else [selection]


def apply_threshold_overrides(base: ClassificationThresholds, spec: str | None) -> ClassificationThresholds:
    """Apply ``key=value,...`` overrides. Keys: the four cutoffs or a variant name."""
    if not spec:
        return base
    values: dict[str, float] = {}
    per_variant = dict(base.per_variant)
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, raw = part.partition("=")
        key = key.strip()
        if not sep:
            raise UsageError(f"threshold override {part!r} is not key=value", "--threshold-overrides")
        try:
            value = float(raw)
        except ValueError:
            raise UsageError(f"threshold override {part!r} has a non-numeric value", "--threshold-overrides") from None
        if key in OVERRIDE_KEYS:
            values[key] = value
        elif key in VARIANTS:
            per_variant[key] = value
        else:
            raise UsageError(f"unknown threshold key {key!r}", "--threshold-overrides")
    current = {k: getattr(base, k) for k in OVERRIDE_KEYS}
    current.update(values)
    return ClassificationThresholds(**current, per_variant=per_variant)


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _decisions(rbo_p: float) -> dict[str, Any]:
    return {
        "percentile_method": ingestion.PERCENTILE_METHOD,
        "quartile_method": validation.QUARTILE_METHOD,
        "rbo_p": rbo_p,
        "rbo_mode": validation.RBO_MODE,
        "scoring_window": "whole-series",
    }


def _manifest(args: argparse.Namespace, inputs: dict[str, str], profile: config.ScoringProfile,
              profile_text: str, thresholds: ClassificationThresholds) -> dict[str, Any]:
    return {
        "tool": "wise",
        "version": __version__,
        "command": args.command,
        "inputs": {name: {"path": path, "sha256": _sha256(path)} for name, path in inputs.items()},
        "profile": {
            "source": str(args.profile),
            "name": profile.name,
            "sha256": hashlib.sha256(profile_text.encode()).hexdigest(),
        },
        "variant": args.variant,
        "threshold_overrides": args.threshold_overrides,
        "thresholds": thresholds.to_dict(),
        "format": args.format,
        "decisions": _decisions(args.rbo_p),
        "backend": backend_name(),
    }


def _load_profile(args) -> tuple[config.ScoringProfile, str, ClassificationThresholds]:
    profile, text = config.find_profile(args.profile)
    thresholds = apply_threshold_overrides(profile.thresholds, args.threshold_overrides)
    return profile, text, thresholds


def _write_outputs(out_dir: str | None, files: dict[str, str]) -> None:
    if not out_dir:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out / name, "w", newline="") as fh:
            fh.write(text)


# --------------------------------------------------------------------------
# score
# --------------------------------------------------------------------------


def timeline_table(reports: Sequence[MachineScoreReport], window_bounds: dict[str, tuple[int, int]]) -> str:
    """One row per machine and scoring window: the four variants plus per-resource scores."""
    names: list[str] = []
    for r in reports:
        for d in r.details:
            if d.name not in names:
                names.append(d.name)
    header = ["machine_id", "machine_type", "window", "window_start", "window_end",
              "s1", "s2", "s3", "s4", "n_scored", "penalty_total"]
    for name in names:
        header += [f"{name}:rate", f"{name}:tanh", f"{name}:exp", f"{name}:penalty"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in reports:
        start, end = window_bounds.get(r.machine_id, ("", ""))
        row = [r.machine_id, r.machine_type or "", 0, start, end,
               _fmt(r.s1), _fmt(r.s2), _fmt(r.s3), _fmt(r.s4), r.n_scored, _fmt(r.penalty_total)]
        by_name = {d.name: d for d in r.details}
        for name in names:
            d = by_name.get(name)
            if d is None:
                row += ["", "", "", ""]
            else:
                row += [_fmt(d.rate), _fmt(d.score_tanh), _fmt(d.score_exp), _fmt(d.penalty)]
        writer.writerow(row)
    return buf.getvalue()


def _score_table(reports: Sequence[MachineScoreReport], variants: Sequence[str]) -> str:
    lines = [f"{'machine_id':<20} {'s1':>7} {'s2':>7} {'s3':>7} {'s4':>7}  verdict"]
    for r in reports:
        ok = all(r.verdicts.machine[v] for v in variants)
        flags = [d.name for d in r.details if d.over_limit]
        note = f" (over limit: {', '.join(flags)})" if flags else ""
        lines.append(
            f"{r.machine_id:<20} {r.s1:7.4f} {r.s2:7.4f} {r.s3:7.4f} {r.s4:7.4f}  "
            f"{'pass' if ok else 'FAIL'}{note}"
        )
    return "\n".join(lines) + "\n"


def cmd_score(args: argparse.Namespace) -> int:
    profile, profile_text, thresholds = _load_profile(args)
    series = ingestion.parse_series(args.utilization)
    reports = pipeline.score_series(series, profile, thresholds)
    variants = _variants(args.variant)

    bounds = {}
    for s in series:
        if len(s):
            lo, hi = int(s.timestamps[0]), int(s.timestamps[-1])
            prev = bounds.get(s.machine_id, (lo, hi))
            bounds[s.machine_id] = (min(prev[0], lo), max(prev[1], hi))

    failing = [r.machine_id for r in reports if not all(r.verdicts.machine[v] for v in variants)]
    manifest = _manifest(args, {"utilization": args.utilization}, profile, profile_text, thresholds)
    document = {
        "manifest": manifest,
        "variants": variants,
        "machines": [r.to_dict() for r in reports],
        "summary": {"machines": len(reports), "failing": failing, "all_pass": not failing},
    }
    files = {
        "scores.json": _dump_json(document),
        "timeline.csv": timeline_table(reports, bounds),
        "manifest.json": _dump_json(manifest),
    }
    _write_outputs(args.out_dir, files)
    sys.stdout.write(files["scores.json"] if args.format == "document" else _score_table(reports, variants))
    return EXIT_FAIL if failing else EXIT_OK


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    profile, profile_text, thresholds = _load_profile(args)
    series = ingestion.parse_series(args.utilization)
    records = validation.load_benchmarks(args.benchmark)
    reports = pipeline.score_series(series, profile, thresholds)
    variants = _variants(args.variant)
    results = pipeline.validate_fleet(reports, records, variants, thresholds, args.rbo_p)

    manifest = _manifest(
        args, {"utilization": args.utilization, "benchmark": args.benchmark}, profile, profile_text, thresholds
    )
    document = {"manifest": manifest, "reports": [r.to_dict() for r in results]}
    files = {"validation.json": _dump_json(document), "manifest.json": _dump_json(manifest)}
    _write_outputs(args.out_dir, files)
    if args.format == "document":
        sys.stdout.write(files["validation.json"])
    else:
        lines = [f"{'variant':<8} {'function':<8} {'precision':>9} {'recall':>7} {'ranking':>8}  truth/predicted"]
        for r in results:
            prec = "undef" if r.precision_undefined else f"{r.precision:.3f}"
            lines.append(
                f"{r.variant:<8} {validation.VARIANT_LABELS[r.variant]:<8} {prec:>9} {r.recall:7.3f} "
                f"{r.ranking:8.3f}  {len(r.truth_set)}/{len(r.predicted_set)}"
            )
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate / replay
# --------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = simulator.load_scenario(args.scenario)
    if args.seed is not None:
        doc = scenario.to_dict()
        doc["seed"] = args.seed
        scenario = simulator.parse_scenario(doc)
    fleet = simulator.generate(scenario)
    out_dir = args.out_dir or "."
    written = fleet.write(out_dir)
    for name, path in written.items():
        sys.stdout.write(f"wrote {path}\n")
    sys.stdout.write(f"planted truth: {', '.join(fleet.truth)}\n")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}", str(args.manifest)) from None
    command = manifest.get("command")
    if command not in ("score", "validate"):
        raise ConfigError(f"cannot replay command {command!r}", "command")
    inputs = manifest.get("inputs", {})
    for name, info in inputs.items():
        if _sha256(info["path"]) != info["sha256"]:
            raise DataError(f"{name} input changed since the manifest was written", None, info["path"])
    argv = [command, inputs["utilization"]["path"]]
    if command == "validate":
        argv.append(inputs["benchmark"]["path"])
    argv += ["--profile", manifest["profile"]["source"], "--variant", manifest["variant"],
             "--format", manifest["format"], "--rbo-p", repr(manifest["decisions"]["rbo_p"])]
    if manifest.get("threshold_overrides"):
        argv += ["--threshold-overrides", manifest["threshold_overrides"]]
    if args.out_dir:
        argv += ["--out-dir", args.out_dir]
    return main(argv)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _rbo_p(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {raw!r}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", default=config.DEFAULT_PROFILE,
                        help="profile file or bundled profile name (default: %(default)s)")
    common.add_argument("--variant", choices=[*VARIANTS, "all"], default="all")
    common.add_argument("--out-dir", help="directory for report files")
    common.add_argument("--format", choices=["table", "document"], default="table",
                        help="stdout rendering")
    common.add_argument("--rbo-p", type=_rbo_p, default=validation.DEFAULT_RBO_P,
                        help="rank-biased overlap persistence (default: %(default)s)")
    common.add_argument("--threshold-overrides", metavar="KEY=VALUE[,...]",
                        help="override cutoffs, e.g. tanh_overall=0.8,s4=0.3")

    parser = argparse.ArgumentParser(prog="wise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score machines from utilization data")
    p.add_argument("utilization", help="utilization CSV (or JSON/YAML document)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("validate", parents=[common], help="compare WISE picks with benchmark ground truth")
    p.add_argument("utilization")
    p.add_argument("benchmark", help="benchmark CSV")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="generate a synthetic fleet with planted truth")
    p.add_argument("scenario", help="scenario file or bundled name: " + ", ".join(simulator.WORKLOADS))
    p.add_argument("--out-dir", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a score/validate run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"wise: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ScoringError, ValidationSetupError) as exc:
        print(f"wise: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except WiseError as exc:  # pragma: no cover - every subclass is handled above
        print(f"wise: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
