"""Command-line interface: reproducible analyze / simulate / tune runs.

Every run writes its outputs plus a ``manifest.json`` recording the
command, all resolved parameters, the seed, SHA-256 digests of the
input files, the package version, and a timestamp. Re-running with
``--from-manifest manifest.json`` (plus a fresh ``--out``) reproduces
the data outputs byte-for-byte; input files are re-verified against
the recorded digests first.

Errors are reported as a single machine-parsable line on stderr,
``error:<category>: <message>``, with a nonzero exit code. Categories:
``usage`` (bad flags or values), ``io`` (unreadable or missing
files), ``parse`` (malformed input tables), ``config`` (bad
simulation configs, digest mismatches, empty analyses).

All floating-point output is printed with 9 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .discrete_tests import (
    CONVENTIONS,
    IngestSchema,
    ingest_counts,
    test_count_table,
)
from .estimators import (
    Study,
    benjamini_pi0,
    generalized_pi0,
    pounds_hat_pi0,
    pounds_tilde_pi0,
    storey_pi0,
)
from .fdr import (
    FdrEstimator,
    adaptive_bh,
    bh_procedure,
    build_rejection_process,
    threshold,
)
from .sim import (
    PI0_METHODS,
    PROCEDURES,
    DEFAULT_PI0_METHODS,
    DEFAULT_PROCEDURES,
    ScenarioSpec,
    run_replications,
)
from .tuning import TuningGrid, bootstrap_tune

_EXIT_CODES = {"usage": 2, "io": 1, "parse": 1, "config": 1}


class CliError(Exception):
    """An error with a machine-parsable category."""

    def __init__(self, category: str, message: str) -> None:
        super().__init__(message)
        self.category = category
        self.message = message


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliError("usage", message)


# ---------------------------------------------------------------------------
# formatting helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    """Render one CSV cell: floats at 9 significant digits, NaN as NA."""
    if isinstance(x, float):
        if math.isnan(x):
            return "NA"
        return f"{x:.9g}"
    if x is None:
        return "NA"
    return str(x)


def _jsonify(obj):
    """Round floats to 9 significant digits; map non-finite to JSON-safe."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "Infinity" if obj > 0 else "-Infinity"
        return float(f"{obj:.9g}")
    if isinstance(obj, (np.floating,)):
        return _jsonify(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonify(payload), fh, indent=2)
        fh.write("\n")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror}") from exc


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _ensure_out_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(
            "io", f"cannot create output directory {path}: {exc.strerror}"
        ) from exc


def _write_manifest(
    out_dir: str, command: str, settings: dict, inputs: dict[str, dict]
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": settings.get("seed"),
        "arguments": settings,
        "inputs": inputs,
    }
    # Arguments must round-trip exactly for byte-identical replays, so
    # the manifest is written without the 9-significant-digit rounding
    # applied to reported results.
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _load_manifest(path: str, command: str) -> dict:
    data = _read_bytes(path)
    try:
        manifest = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CliError("parse", f"malformed manifest {path}: {exc}") from exc
    if manifest.get("command") != command:
        raise CliError(
            "usage",
            f"manifest {path} records a "
            f"{manifest.get('command')!r} run, not {command!r}",
        )
    if not isinstance(manifest.get("arguments"), dict):
        raise CliError("parse", f"manifest {path} has no arguments record")
    return manifest


def _verify_digest(manifest: dict, role: str, path: str, data: bytes) -> None:
    recorded = manifest.get("inputs", {}).get(role)
    if recorded is None:
        return
    if _sha256(data) != recorded.get("sha256"):
        raise CliError(
            "config",
            f"input {path} changed since the manifest was recorded "
            "(sha256 mismatch)",
        )


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

_TABLE_PROCEDURES = ("generalized", "storey", "bh", "adaptive_bh")


def _build_schema(settings: dict) -> IngestSchema:
    try:
        return IngestSchema(
            kind=settings["test"],
            trials=settings.get("trials"),
            size=settings.get("size"),
            reps=settings.get("reps", 1),
            min_total=settings["min_total"],
            max_total=settings["max_total"],
        )
    except ValueError as exc:
        raise CliError("usage", str(exc)) from exc


def _ingest_study(settings: dict, manifest: dict | None):
    path = settings["counts"]
    data = _read_bytes(path)
    if manifest is not None:
        _verify_digest(manifest, "counts", path, data)
    schema = _build_schema(settings)
    try:
        table = ingest_counts(io.BytesIO(data), schema)
    except ValueError as exc:
        raise CliError("parse", f"{path}: {exc}") from exc
    if len(table) == 0:
        raise CliError(
            "config",
            "no features remain after filtering (m = 0); "
            "relax --min-total/--max-total",
        )
    try:
        pvals, supports = test_count_table(table, settings["convention"])
    except ValueError as exc:
        raise CliError("usage", str(exc)) from exc
    return table, Study(pvals, supports), {"counts": {"path": path, "sha256": _sha256(data)}}


def cmd_analyze(settings: dict, out_dir: str, manifest: dict | None = None) -> int:
    """Test a count table, estimate the true-null proportion, threshold."""
    table, study, inputs = _ingest_study(settings, manifest)
    lam, eps = settings["lambda"], settings["epsilon"]
    alphas = settings["alphas"]

    try:
        estimates = {
            "storey": storey_pi0(study, lam),
            "generalized": generalized_pi0(study, lam, eps),
            "pounds_tilde": pounds_tilde_pi0(study),
            "pounds_hat": pounds_hat_pi0(study),
        }
    except ValueError as exc:
        raise CliError("usage", str(exc)) from exc
    try:
        estimates["benjamini"] = benjamini_pi0(study)
    except ValueError:
        estimates["benjamini"] = None

    _ensure_out_dir(out_dir)
    _write_csv(
        os.path.join(out_dir, "features.csv"),
        ["id", "pvalue", "support"],
        (
            (
                table.ids[i],
                float(study.pvalues[i]),
                ";".join(f"{v:.9g}" for v in study.supports[i]),
            )
            for i in range(study.m)
        ),
    )

    _write_json(
        os.path.join(out_dir, "estimates.json"),
        {
            "m": study.m,
            "dropped": table.dropped,
            "convention": settings["convention"],
            "lambda": lam,
            "epsilon": eps,
            "estimates": {
                name: (est.to_json_dict() if est is not None else None)
                for name, est in estimates.items()
            },
        },
    )

    proc = build_rejection_process(study.pvalues)
    rows = []
    for alpha in alphas:
        for name in _TABLE_PROCEDURES:
            if name == "generalized":
                est = FdrEstimator("generalized", estimates["generalized"], lam=lam)
                res = threshold(est, proc, alpha)
                row_lam, row_eps, pi0 = lam, eps, estimates["generalized"].value
            elif name == "storey":
                est = FdrEstimator("storey", estimates["storey"], lam=lam)
                res = threshold(est, proc, alpha)
                row_lam, row_eps, pi0 = lam, 0.0, estimates["storey"].raw
            elif name == "bh":
                res = bh_procedure(study.pvalues, alpha)
                row_lam, row_eps, pi0 = None, None, 1.0
            else:
                if estimates["benjamini"] is None:
                    continue
                res = adaptive_bh(study.pvalues, alpha, estimates["benjamini"])
                row_lam, row_eps = None, None
                pi0 = estimates["benjamini"].value
            rows.append(
                (
                    name,
                    row_lam,
                    row_eps,
                    pi0,
                    alpha,
                    res.t_alpha,
                    res.fdr_at_t,
                    res.rejections,
                )
            )
    _write_csv(
        os.path.join(out_dir, "table.csv"),
        [
            "method",
            "lambda",
            "epsilon",
            "pi0",
            "alpha",
            "threshold",
            "fdr_at_threshold",
            "rejections",
        ],
        rows,
    )
    _write_manifest(out_dir, "analyze", settings, inputs)
    print(f"analyze: m = {study.m}, outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SPEC_KEYS = (
    "kind",
    "m",
    "pi0",
    "alpha_levels",
    "reps",
    "seed",
    "pareto_location",
    "pareto_shape",
    "rho_low",
    "rho_high",
    "trials_size",
    "trials_mean",
    "trials_offset",
    "theta_low",
    "theta_high",
    "theta2_transform",
    "dispersion",
    "reps_per_group",
    "mean_low",
    "mean_high",
    "mean_file",
    "rho_location",
    "rho_shape",
)
_EXTRA_KEYS = ("lambda", "epsilon", "pi0_methods", "procedures", "workers")


def _load_sim_settings(args) -> dict:
    data = _read_bytes(args.config)
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CliError(
            "parse", f"malformed config {args.config}: {exc}"
        ) from exc
    if not isinstance(raw, dict):
        raise CliError("config", "config must be a JSON object")
    allowed = set(_SPEC_KEYS) | set(_EXTRA_KEYS)
    for key in raw:
        if key not in allowed:
            raise CliError("config", f"unknown config key {key!r}")
    for key in ("kind", "m", "pi0"):
        if key not in raw:
            raise CliError("config", f"config is missing required key {key!r}")
    settings = dict(raw)
    settings.setdefault("lambda", 0.5)
    settings.setdefault("epsilon", 1.0)
    settings.setdefault("pi0_methods", list(DEFAULT_PI0_METHODS))
    settings.setdefault("procedures", list(DEFAULT_PROCEDURES))
    settings.setdefault("workers", 1)
    settings.setdefault("seed", 0)
    settings.setdefault("reps", 50)
    settings.setdefault("alpha_levels", [0.05, 0.1])
    # command-line overrides
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.reps is not None:
        settings["reps"] = args.reps
    if args.alpha:
        settings["alpha_levels"] = args.alpha
    if args.workers is not None:
        settings["workers"] = args.workers
    settings["config_path"] = args.config
    settings["config_sha256"] = _sha256(data)
    return settings


def _scenario_from_settings(settings: dict) -> ScenarioSpec:
    kwargs = {k: settings[k] for k in _SPEC_KEYS if k in settings}
    kwargs["alpha_levels"] = tuple(float(a) for a in settings["alpha_levels"])
    try:
        return ScenarioSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc)) from exc


def cmd_simulate(settings: dict, out_dir: str, manifest: dict | None = None) -> int:
    """Run a simulation scenario and write tidy per-replication files."""
    spec = _scenario_from_settings(settings)
    inputs: dict[str, dict] = {}
    if settings.get("config_path"):
        inputs["config"] = {
            "path": settings["config_path"],
            "sha256": settings.get("config_sha256"),
        }
    if spec.mean_file is not None:
        data = _read_bytes(spec.mean_file)
        if manifest is not None:
            _verify_digest(manifest, "mean_file", spec.mean_file, data)
        inputs["mean_file"] = {
            "path": spec.mean_file,
            "sha256": _sha256(data),
        }

    for name in settings["pi0_methods"]:
        if name not in PI0_METHODS:
            raise CliError(
                "config",
                f"unknown pi0 method {name!r}; choose from {PI0_METHODS}",
            )
    for name in settings["procedures"]:
        if name not in PROCEDURES:
            raise CliError(
                "config",
                f"unknown procedure {name!r}; choose from {PROCEDURES}",
            )

    summary = run_replications(
        spec,
        pi0_methods=settings["pi0_methods"],
        procedures=settings["procedures"],
        lam=settings["lambda"],
        epsilon=settings["epsilon"],
        workers=settings["workers"],
    )

    _ensure_out_dir(out_dir)
    _write_csv(
        os.path.join(out_dir, "pi0_replications.csv"),
        ["rep", "method", "estimate", "excess"],
        (
            (r, name, float(summary.pi0_estimates[r, j]), float(summary.excess[r, j]))
            for r in range(spec.reps)
            for j, name in enumerate(summary.pi0_methods)
        ),
    )
    _write_csv(
        os.path.join(out_dir, "mtp_replications.csv"),
        ["rep", "procedure", "alpha", "threshold", "rejections", "fdp"],
        (
            (
                r,
                name,
                float(alpha),
                float(summary.thresholds[r, j, a]),
                int(summary.rejections[r, j, a]),
                float(summary.fdp[r, j, a]),
            )
            for r in range(spec.reps)
            for j, name in enumerate(summary.procedures)
            for a, alpha in enumerate(spec.alpha_levels)
        ),
    )
    agg = summary.aggregate()
    agg["lambda"] = settings["lambda"]
    agg["epsilon"] = settings["epsilon"]
    _write_json(os.path.join(out_dir, "aggregate.json"), agg)
    _write_manifest(out_dir, "simulate", settings, inputs)
    print(
        f"simulate: kind = {spec.kind}, reps = {spec.reps}, "
        f"outputs in {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------


def _parse_grid(settings: dict) -> TuningGrid:
    def parse_csv_floats(text: str, what: str) -> list[float]:
        try:
            values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
        except ValueError as exc:
            raise CliError(
                "usage", f"malformed {what} list {text!r}: {exc}"
            ) from exc
        if not values:
            raise CliError("usage", f"empty {what} list")
        return values

    points: list[tuple[float, float]] = []
    if settings.get("points"):
        for token in settings["points"]:
            pieces = token.split(",")
            if len(pieces) != 2:
                raise CliError(
                    "usage",
                    f"malformed grid point {token!r}; expected LAMBDA,EPSILON",
                )
            try:
                points.append((float(pieces[0]), float(pieces[1])))
            except ValueError as exc:
                raise CliError(
                    "usage", f"malformed grid point {token!r}: {exc}"
                ) from exc
    else:
        lams = parse_csv_floats(settings["lambdas"], "lambda")
        epss = parse_csv_floats(settings["epsilons"], "epsilon")
        points = [(lam, eps) for lam in lams for eps in epss]
    try:
        return TuningGrid(points, B=settings["B"], seed=settings["seed"])
    except ValueError as exc:
        raise CliError("usage", str(exc)) from exc


def cmd_tune(settings: dict, out_dir: str, manifest: dict | None = None) -> int:
    """Bootstrap-select a tuning pair on a count table."""
    _, study, inputs = _ingest_study(settings, manifest)
    grid = _parse_grid(settings)
    try:
        result = bootstrap_tune(study, grid, workers=settings["workers"])
    except ValueError as exc:
        raise CliError("config", str(exc)) from exc

    _ensure_out_dir(out_dir)
    payload = result.to_json_dict()
    for row, (lam, eps) in zip(payload["mse"], grid.points):
        row["lambda"] = lam
        row["epsilon"] = eps
    payload.update(
        {"m": study.m, "B": grid.B, "seed": grid.seed}
    )
    _write_json(os.path.join(out_dir, "tuning.json"), payload)
    _write_manifest(out_dir, "tune", settings, inputs)
    chosen = payload["chosen"]
    print(
        f"tune: chose lambda = {chosen['lambda']:.9g}, "
        f"epsilon = {chosen['epsilon']:.9g}, outputs in {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_ingest_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("counts", nargs="?", help="count table (CSV or TSV)")
    sub.add_argument(
        "--test",
        choices=("bin", "fet", "ent"),
        help="exact test family matching the table",
    )
    sub.add_argument(
        "--trials",
        type=int,
        default=None,
        help="constant per-group trial count for 3-column fet tables",
    )
    sub.add_argument(
        "--size",
        type=float,
        default=None,
        help="per-sample shape parameter for ent tables",
    )
    sub.add_argument(
        "--reps",
        type=int,
        default=1,
        help="samples per group represented by an ent table (default 1)",
    )
    sub.add_argument(
        "--min-total",
        type=int,
        default=1,
        help="drop features with a per-group total below this (default 1)",
    )
    sub.add_argument(
        "--max-total",
        type=int,
        default=None,
        help="drop features with a per-group total above this",
    )
    sub.add_argument(
        "--convention",
        choices=CONVENTIONS,
        default="minlik",
        help="two-sided p-value convention (default minlik)",
    )


def build_parser() -> _Parser:
    parser = _Parser(
        prog="discretefdr",
        description=(
            "Exact tests for count data, true-null-proportion estimation, "
            "and FDR thresholding with full p-value supports."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    subs = parser.add_subparsers(dest="command", metavar="{analyze,simulate,tune}")

    an = subs.add_parser(
        "analyze", help="test a count table and threshold the p-values"
    )
    _add_ingest_flags(an)
    an.add_argument("--lambda", dest="lam", type=float, default=0.5)
    an.add_argument("--epsilon", type=float, default=1.0)
    an.add_argument(
        "--alpha",
        type=float,
        action="append",
        help="nominal FDR level; repeatable (default 0.05)",
    )
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--out", help="output directory")
    an.add_argument("--from-manifest", dest="from_manifest")
    an.set_defaults(command="analyze")

    si = subs.add_parser("simulate", help="run a seeded simulation scenario")
    si.add_argument("config", nargs="?", help="scenario config (JSON)")
    si.add_argument("--seed", type=int, default=None)
    si.add_argument("--reps", type=int, default=None)
    si.add_argument(
        "--alpha", type=float, action="append", help="overrides alpha_levels"
    )
    si.add_argument("--workers", type=int, default=None)
    si.add_argument("--out", help="output directory")
    si.add_argument("--from-manifest", dest="from_manifest")
    si.set_defaults(command="simulate")

    tu = subs.add_parser(
        "tune", help="bootstrap-select the estimator tuning pair"
    )
    _add_ingest_flags(tu)
    tu.add_argument(
        "--lambdas",
        default="0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,"
        "0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95",
        help="comma-separated lambda grid",
    )
    tu.add_argument(
        "--epsilons",
        default="0,0.25,0.5,0.75,1",
        help="comma-separated epsilon grid",
    )
    tu.add_argument(
        "--point",
        dest="points",
        action="append",
        help="explicit LAMBDA,EPSILON grid point; repeatable, "
        "overrides --lambdas/--epsilons",
    )
    tu.add_argument("--B", type=int, default=100, help="bootstrap resamples")
    tu.add_argument("--seed", type=int, default=0)
    tu.add_argument("--workers", type=int, default=1)
    tu.add_argument("--out", help="output directory")
    tu.add_argument("--from-manifest", dest="from_manifest")
    tu.set_defaults(command="tune")

    return parser


def _require_out(args) -> str:
    if not args.out:
        raise CliError("usage", "--out is required")
    return args.out


def _analyze_settings(args) -> dict:
    if not args.counts:
        raise CliError("usage", "a count table path is required")
    if not args.test:
        raise CliError("usage", "--test is required")
    return {
        "counts": args.counts,
        "test": args.test,
        "trials": args.trials,
        "size": args.size,
        "reps": args.reps,
        "min_total": args.min_total,
        "max_total": args.max_total,
        "convention": args.convention,
        "lambda": args.lam,
        "epsilon": args.epsilon,
        "alphas": args.alpha or [0.05],
        "seed": args.seed,
    }


def _tune_settings(args) -> dict:
    if not args.counts:
        raise CliError("usage", "a count table path is required")
    if not args.test:
        raise CliError("usage", "--test is required")
    return {
        "counts": args.counts,
        "test": args.test,
        "trials": args.trials,
        "size": args.size,
        "reps": args.reps,
        "min_total": args.min_total,
        "max_total": args.max_total,
        "convention": args.convention,
        "lambdas": args.lambdas,
        "epsilons": args.epsilons,
        "points": args.points,
        "B": args.B,
        "seed": args.seed,
        "workers": args.workers,
    }


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise CliError(
                "usage", "a subcommand is required: analyze | simulate | tune"
            )
        out_dir = _require_out(args)
        manifest = None
        if getattr(args, "from_manifest", None):
            manifest = _load_manifest(args.from_manifest, args.command)
            settings = manifest["arguments"]
        elif args.command == "analyze":
            settings = _analyze_settings(args)
        elif args.command == "tune":
            settings = _tune_settings(args)
        else:
            if not args.config:
                raise CliError("usage", "a config path is required")
            settings = _load_sim_settings(args)
        if args.command == "analyze":
            return cmd_analyze(settings, out_dir, manifest)
        if args.command == "tune":
            return cmd_tune(settings, out_dir, manifest)
        return cmd_simulate(settings, out_dir, manifest)
    except CliError as exc:
        print(f"error:{exc.category}: {exc.message}", file=sys.stderr)
        return _EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
