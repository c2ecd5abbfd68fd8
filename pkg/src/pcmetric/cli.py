"""Command-line surface: compare, distort, profile, heatmap, correlate.

Reports go to stdout (or --out) as JSON with an optional flat CSV mirror;
diagnostics go to stderr. Exit codes: 0 success, 1 usage, 2 I/O, 3 data
validation, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .backend import resolve_backend
from .correlation import evaluate_metric
from .distortion_lab import DistortionSpec
from .errors import DataError, NumericError
from .geometry_metrics import (
    KINDS,
    POOLINGS,
    REDUCTIONS,
    MetricConfig,
    compute_metric,
    default_per_grid,
    directed_errors,
    distance_profile,
    metric_grid,
    per_point_errors,
)
from .normal_estimation import DEFAULT_K, estimate_normals
from .pc_io import export_error_heatmap, load_mos_table, load_ply, save_ply

log = logging.getLogger("pcmetric")

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the exit-code taxonomy
    # reserves 2 for I/O, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer; got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive; got {text}")
    return value


def _open_unit(text: str) -> float:
    value = float(text)
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError(f"must lie strictly in (0, 1); got {text}")
    return value


def _per_value(text: str) -> float:
    value = float(text)
    if not (0.0 < value <= 100.0):
        raise argparse.ArgumentTypeError(f"must lie in (0, 100]; got {text}")
    return value


def _per_list(text: str) -> list[float]:
    return [_per_value(part) for part in text.split(",") if part.strip()]


def _timestamp(args) -> dict:
    if args.no_timestamp:
        return {}
    return {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}


def _emit_json(payload: dict, out_path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def _write_csv(rows: list[list], header: list[str], out_path: str | None) -> None:
    lines = [",".join(header)]
    lines += [",".join(_csv_cell(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sidecar_bits(path) -> int | None:
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        return None
    try:
        bits = json.loads(sidecar.read_text(encoding="utf-8")).get("precision_bits")
    except ValueError as exc:
        raise DataError(f"malformed sidecar {sidecar.name}: {exc}") from exc
    if bits is None:
        return None
    if not isinstance(bits, int) or bits <= 0:
        raise DataError(f"{sidecar.name}: precision_bits must be a positive integer")
    return bits


def _resolve_peak(args, reference_path) -> float:
    if args.peak is not None:
        return args.peak
    if args.precision_bits is not None:
        return float(2**args.precision_bits - 1)
    bits = _sidecar_bits(reference_path)
    if bits is not None:
        log.info("signal peak from sidecar: %d-bit", bits)
        return float(2**bits - 1)
    raise _UsageError(
        "signal peak unknown: pass --peak or --precision-bits, or provide a "
        f"'{Path(str(reference_path)).name}.json' sidecar with a precision_bits field"
    )


def _ensure_normals(cloud, k: int, backend, notes: dict, role: str):
    if cloud.normals is not None:
        notes[role] = "file"
        return cloud
    notes[role] = f"estimated(k={k})"
    log.info("estimating normals for %s cloud (k=%d)", role, k)
    return estimate_normals(cloud, k, backend=backend)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def cmd_compare(args) -> int:
    original = load_ply(args.original)
    decoded = load_ply(args.decoded)
    peak = _resolve_peak(args, args.original)
    backend = resolve_backend(args.backend)

    if args.grid:
        kinds = list(KINDS) if args.kind in (None, "both") else [args.kind]
    else:
        kinds = list(KINDS) if args.kind == "both" else [args.kind or "p2po"]

    notes: dict = {}
    if "p2pl" in kinds:
        original = _ensure_normals(original, args.normals_k, backend, notes, "original")
        decoded = _ensure_normals(decoded, args.normals_k, backend, notes, "decoded")

    if args.grid:
        if args.per is not None:
            raise _UsageError("--per conflicts with --grid; use --per-list")
        results = metric_grid(
            original,
            decoded,
            signal_peak=peak,
            kinds=kinds,
            per_list=args.per_list,
            backend=backend,
        )
    else:
        if args.per_list is not None:
            raise _UsageError("--per-list requires --grid")
        if args.reduction == "gh" and args.per is None:
            raise _UsageError("--reduction gh requires --per")
        results = [
            compute_metric(
                original,
                decoded,
                MetricConfig(kind, args.reduction, args.per, args.pooling, peak),
                backend=backend,
            )
            for kind in kinds
        ]

    payload = {
        "command": "compare",
        "original": str(args.original),
        "decoded": str(args.decoded),
        "signal_peak": peak,
        "metadata": {"backend": backend, "normals": notes, **_timestamp(args)},
        "results": [r.to_dict() for r in results],
    }
    _emit_json(payload, args.out)
    if args.csv:
        header = ["kind", "reduction", "per", "pooling", "d_ab", "d_ba", "undirected", "psnr_db"]
        rows = []
        for r in results:
            d = r.to_dict()
            rows.append([
                d["kind"], d["reduction"], d["per"], d["pooling"],
                d["d_ab"], d["d_ba"], d["undirected"],
                math.inf if d["psnr_db"] is None else d["psnr_db"],
            ])
        _write_csv(rows, header, args.csv)
    return 0


# ---------------------------------------------------------------------------
# distort
# ---------------------------------------------------------------------------


def cmd_distort(args) -> int:
    required = {"octree": ("depth",), "jitter": ("sigma",), "outliers": ("fraction", "magnitude")}
    missing = [f"--{name}" for name in required[args.method] if getattr(args, name) is None]
    if missing:
        raise _UsageError(f"--method {args.method} requires {', '.join(missing)}")

    spec = DistortionSpec(
        method=args.method,
        seed=args.seed,
        depth=args.depth,
        sigma=args.sigma,
        fraction=args.fraction,
        magnitude=args.magnitude,
    )
    cloud = load_ply(args.input)
    distorted = spec.apply(cloud)
    save_ply(distorted, args.output, encoding=args.encoding)

    manifest = {
        "command": "distort",
        "input": str(args.input),
        "output": str(args.output),
        "spec": spec.to_dict(),
        "points_in": cloud.n_points,
        "points_out": distorted.n_points,
        **_timestamp(args),
    }
    bits = _sidecar_bits(args.input)
    if bits is not None:
        manifest["precision_bits"] = bits
    manifest_path = args.manifest or str(args.output) + ".json"
    Path(manifest_path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit_json(manifest, args.out)
    return 0


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------


def _direction_pairs(direction: str, original, decoded):
    pairs = []
    if direction in ("ab", "both"):
        pairs.append(("ab", original, decoded))
    if direction in ("ba", "both"):
        pairs.append(("ba", decoded, original))
    return pairs


def cmd_profile(args) -> int:
    original = load_ply(args.original)
    decoded = load_ply(args.decoded)
    backend = resolve_backend(args.backend)
    notes: dict = {}
    if args.kind == "p2pl":
        original = _ensure_normals(original, args.normals_k, backend, notes, "original")
        decoded = _ensure_normals(decoded, args.normals_k, backend, notes, "decoded")

    rows = []
    for label, query, reference in _direction_pairs(args.direction, original, decoded):
        errors = directed_errors(query, reference, args.kind, backend=backend)
        grid = args.per_list or default_per_grid(errors.source_size)
        for per, value in distance_profile(errors, grid):
            rows.append([label, per, value])
    _write_csv(rows, ["direction", "per", "value"], args.out)
    return 0


# ---------------------------------------------------------------------------
# heatmap
# ---------------------------------------------------------------------------


def cmd_heatmap(args) -> int:
    original = load_ply(args.original)
    decoded = load_ply(args.decoded)
    backend = resolve_backend(args.backend)
    if args.direction == "ba":
        query, reference = decoded, original
    else:
        query, reference = original, decoded
    notes: dict = {}
    if args.kind == "p2pl":
        reference = _ensure_normals(reference, args.normals_k, backend, notes, "reference")
    errors = per_point_errors(query, reference, args.kind, backend=backend)
    export_error_heatmap(query, errors, args.out, encoding=args.encoding)
    log.info("wrote heatmap over %d points to %s", query.n_points, args.out)
    return 0


# ---------------------------------------------------------------------------
# correlate
# ---------------------------------------------------------------------------


def cmd_correlate(args) -> int:
    records = load_mos_table(args.mos_csv)
    labels = args.metric or list(records[0].objective_scores)
    if not labels:
        raise DataError("the MOS table has no numeric objective-score columns")

    reports = [evaluate_metric(records, label) for label in labels]
    ranking = [
        r.metric_label
        for r in sorted(reports, key=lambda r: (-r.plcc_fitted, r.metric_label))
    ]
    payload = {
        "command": "correlate",
        "source": str(args.mos_csv),
        "metadata": _timestamp(args),
        "reports": [r.to_dict() for r in reports],
        "ranking": ranking,
    }
    _emit_json(payload, args.out)

    if args.fit_csv_dir:
        out_dir = Path(args.fit_csv_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ordered = sorted(records, key=lambda r: r.stimulus_id)
        for report in reports:
            label = report.metric_label
            y = np.array([r.objective_scores[label] for r in ordered])
            mos = np.array([r.mos for r in ordered])
            keep = np.isfinite(y)
            pred = report.model.predict(y[keep])
            rows = [
                [float(a), float(b), float(c)]
                for a, b, c in zip(y[keep], mos[keep], pred)
            ]
            _write_csv(rows, ["y", "mos", "mos_predicted"], str(out_dir / f"{label}.csv"))
    return 0


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, normals: bool = True):
    p.add_argument("--backend", choices=("numba", "numpy"), default=None,
                   help="kernel backend override (default: numba when available)")
    if normals:
        p.add_argument("--normals-k", type=_positive_int, default=DEFAULT_K,
                       help="neighborhood size when normals must be estimated")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcmetric", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    from . import __version__

    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compare", help="metric(s) between an original and a decoded cloud")
    p.add_argument("original")
    p.add_argument("decoded")
    p.add_argument("--kind", choices=(*KINDS, "both"), default=None)
    p.add_argument("--reduction", choices=REDUCTIONS, default="mse")
    p.add_argument("--per", type=_per_value, default=None)
    p.add_argument("--pooling", choices=POOLINGS, default="max")
    p.add_argument("--grid", action="store_true",
                   help="full per/pooling grid plus the MSE baselines")
    p.add_argument("--per-list", type=_per_list, default=None,
                   help="comma-separated per values overriding the default grid")
    p.add_argument("--peak", type=_positive_float, default=None)
    p.add_argument("--precision-bits", type=_positive_int, default=None)
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.add_argument("--csv", default=None, help="also write a flat CSV mirror")
    p.add_argument("--no-timestamp", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("distort", help="generate a codec-like distorted cloud")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=("octree", "jitter", "outliers"), required=True)
    p.add_argument("--depth", type=_positive_int, default=None)
    p.add_argument("--sigma", type=_positive_float, default=None)
    p.add_argument("--fraction", type=_open_unit, default=None)
    p.add_argument("--magnitude", type=_positive_float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoding", choices=("ascii", "binary_little_endian"),
                   default="binary_little_endian")
    p.add_argument("--manifest", default=None,
                   help="manifest path (default: <output>.json)")
    p.add_argument("--out", default=None, help="also write the manifest JSON here")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("profile", help="ranked-distance profile CSV")
    p.add_argument("original")
    p.add_argument("decoded")
    p.add_argument("--kind", choices=KINDS, default="p2po")
    p.add_argument("--direction", choices=("ab", "ba", "both"), default="both")
    p.add_argument("--per-list", type=_per_list, default=None)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("heatmap", help="per-point error heatmap PLY")
    p.add_argument("original")
    p.add_argument("decoded")
    p.add_argument("--kind", choices=KINDS, default="p2po")
    p.add_argument("--direction", choices=("ab", "ba"), default="ba",
                   help="ba colors the decoded cloud by its error toward the original")
    p.add_argument("--out", required=True)
    p.add_argument("--encoding", choices=("ascii", "binary_little_endian"),
                   default="binary_little_endian")
    _add_common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("correlate", help="objective-subjective correlation reports")
    p.add_argument("mos_csv")
    p.add_argument("--metric", action="append", default=None,
                   help="objective column to evaluate (repeatable; default: all)")
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.add_argument("--fit-csv-dir", default=None,
                   help="write per-metric (y, mos, mos_predicted) CSVs here")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_correlate)

    return parser


def main(argv=None) -> int:
    # force=True rebinds the handler to the current sys.stderr on every call,
    # which keeps diagnostics on the error stream under test harnesses too
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s", force=True)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"pcmetric: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"pcmetric: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"pcmetric: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"pcmetric: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
