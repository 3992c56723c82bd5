"""Command-line interface: synth, detect, bench, grid and scalability.

Exit codes: 0 on success, 1 for usage errors, 2 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .detectors import METHODS, fit_detector, fit_score
from .model import (
    DEFAULT_LABEL_COLUMN,
    DOMAIN_REPEAT,
    DOMAIN_SYNTH,
    DataError,
    Dataset,
    derive_rng,
    derive_seed,
    format_float,
    ingest_csv,
    write_dataset_csv,
)
from .partitioning import PartitionSet
from .synthdata import GeneratorParams, Kind, SynthSpec, generate

logger = logging.getLogger("iser")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DEFAULT_PSI_GRID = (2, 4, 8, 16, 32, 64, 128, 256)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _atomic_write(path: str | Path, text: str | bytes) -> None:
    """Write via a temp file in the target directory so readers never see partial output."""
    path = Path(path)
    data = text.encode("utf-8") if isinstance(text, str) else text
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}")
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"range min must be < max, got {text!r}")
    return lo, hi


def _load(path: str, label_col: str | None, require_labels: bool = False) -> Dataset:
    """Ingest a CSV; the default label column is used only if present."""
    if label_col is None:
        if not Path(path).is_file():
            raise DataError(f"no such file: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        label_col = DEFAULT_LABEL_COLUMN if DEFAULT_LABEL_COLUMN in header else None
    data = ingest_csv(path, label_col)
    if require_labels and data.labels is None:
        raise DataError(f"{path}: labels required but no label column found")
    return data


def _labels_evaluable(labels: np.ndarray | None) -> bool:
    return labels is not None and 0 < int(labels.sum()) < len(labels)


# ---------------------------------------------------------------- synth


def cmd_synth(args: argparse.Namespace) -> int:
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            overrides[key.strip().replace("-", "_")] = float(value)
        except ValueError:
            raise UsageError(f"--set {key}: {value!r} is not a number") from None
    try:
        params = GeneratorParams().with_overrides(**overrides)
        spec = SynthSpec(
            Kind(args.kind), args.n_normal, args.n_anomaly, args.seed, args.noise, params
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = generate(spec)
    tmp = Path(args.out)
    text_path = tmp.with_name(f".{tmp.name}.part")
    write_dataset_csv(data, text_path)
    os.replace(text_path, tmp)
    logger.info("wrote %d rows to %s", data.n, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- detect


def score_csv(scores: np.ndarray, labels: np.ndarray | None) -> str:
    header = "row_index,score" + (",label" if labels is not None else "")
    lines = [header]
    for i, s in enumerate(scores):
        row = f"{i},{format_float(s)}"
        if labels is not None:
            row += f",{int(labels[i])}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_detect(args: argparse.Namespace) -> int:
    data = _load(args.input, args.label_col)
    if args.psi > data.n:
        raise DataError(f"psi={args.psi} exceeds the number of rows n={data.n}")
    det = fit_detector(
        args.method, data, args.psi, t=args.t, seed=args.seed, normalize=args.normalize,
        n_trees=args.trees, n_jobs=args.jobs,
    )
    scores = det.score(data.points)

    outputs: list[tuple[str, str]] = [(args.scores_out, score_csv(scores, data.labels))]
    if _labels_evaluable(data.labels):
        report = {
            "method": args.method,
            "auroc": metrics.auroc(scores, data.labels),
            "aupr": metrics.aupr(scores, data.labels),
        }
        metrics_out = args.metrics_out or str(Path(args.scores_out).with_suffix(".metrics.json"))
        outputs.append((metrics_out, json.dumps(report, indent=2, sort_keys=True) + "\n"))
    if args.model_out:
        if not isinstance(det.model, PartitionSet):
            raise UsageError("--model-out is only available for iser-a and iser-s")
        outputs.append((args.model_out, json.dumps(det.model.to_dict()) + "\n"))
    for path, text in outputs:
        _atomic_write(path, text)
    return EXIT_OK


# ---------------------------------------------------------------- bench


def _dataset_names(paths: Sequence[str]) -> list[str]:
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [str(p) for p in paths]


def run_bench(
    datasets: dict[str, Dataset],
    methods: Sequence[str],
    psi_grid: Sequence[int],
    repeats: int,
    t: int,
    seed: int,
    normalize: bool = False,
    n_trees: int = 100,
    n_jobs: int = 1,
) -> tuple[list[dict], list[dict], dict]:
    """Grid-search psi per (dataset, method) and aggregate repeats.

    Repeat r of every cell uses the seed derived from ``(seed, r)``, so a cell's
    result is independent of which other methods or datasets are in the plan.
    Returns (summary rows, per-cell rows, JSON report).
    """
    methods = sorted(set(methods))
    repeat_seeds = [derive_seed(seed, r, DOMAIN_REPEAT) for r in range(repeats)]
    cells = []
    for ds_name in sorted(datasets):
        data = datasets[ds_name]
        if not _labels_evaluable(data.labels):
            raise DataError(f"dataset {ds_name!r} needs labels with both classes")
        for method in methods:
            for psi in psi_grid:
                if psi > data.n:
                    continue
                for r, rseed in enumerate(repeat_seeds):
                    cells.append((ds_name, method, psi, r, rseed))

    def run(cell):
        ds_name, method, psi, r, rseed = cell
        data = datasets[ds_name]
        scores = fit_score(
            method, data, psi, t=t, seed=rseed, normalize=normalize, n_trees=n_trees
        )
        return metrics.auroc(scores, data.labels), metrics.aupr(scores, data.labels)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, cells))
    else:
        results = []
        for cell in cells:
            logger.debug("bench cell %s", cell[:4])
            results.append(run(cell))

    per_cell = [
        {"dataset": c[0], "method": c[1], "psi": c[2], "repeat": c[3], "auroc": a, "aupr": p}
        for c, (a, p) in zip(cells, results)
    ]
    runs: dict[tuple[str, str, int], list[tuple[float, float]]] = {}
    for c, res in zip(cells, results):
        runs.setdefault(c[:3], []).append(res)

    summary = []
    by_dataset: dict[str, dict[str, metrics.MethodStats]] = {}
    for ds_name in sorted(datasets):
        for method in methods:
            options = [(psi, runs[(ds_name, method, psi)]) for psi in psi_grid
                       if (ds_name, method, psi) in runs]
            if not options:
                raise DataError(f"no psi in the grid fits dataset {ds_name!r} (n={datasets[ds_name].n})")
            # highest mean AUROC, smallest psi on ties
            best_psi, best_runs = max(
                options, key=lambda o: (float(np.mean([a for a, _ in o[1]])), -o[0])
            )
            stats = metrics.MethodStats.from_runs(best_runs)
            by_dataset.setdefault(ds_name, {})[method] = stats
            summary.append({
                "dataset": ds_name, "method": method, "best_psi": best_psi,
                "auroc_mean": stats.auroc_mean, "auroc_std": stats.auroc_std,
                "aupr_mean": stats.aupr_mean, "aupr_std": stats.aupr_std,
                "n_repeats": stats.n_repeats,
            })

    report: dict = {"datasets": {}}
    for ds_name, stats in by_dataset.items():
        report["datasets"][ds_name] = metrics.EvalReport(stats).to_dict()
    if len(methods) >= 2:
        roc = {ds: {m: s.auroc_mean for m, s in st.items()} for ds, st in by_dataset.items()}
        pr = {ds: {m: s.aupr_mean for m, s in st.items()} for ds, st in by_dataset.items()}
        report["mean_ranks"] = metrics.mean_ranks_by_name(roc)
        report["mean_ranks_aupr"] = metrics.mean_ranks_by_name(pr)
    return summary, per_cell, report


def _rows_csv(rows: list[dict], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(
            format_float(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns
        ))
    return "\n".join(lines) + "\n"


SUMMARY_COLUMNS = (
    "dataset", "method", "best_psi", "auroc_mean", "auroc_std", "aupr_mean", "aupr_std",
    "n_repeats",
)
CELL_COLUMNS = ("dataset", "method", "psi", "repeat", "auroc", "aupr")


def cmd_bench(args: argparse.Namespace) -> int:
    methods = [m for group in args.methods for m in group.split(",") if m]
    unknown = sorted(set(methods) - set(METHODS))
    if unknown:
        raise UsageError(f"unknown method(s): {', '.join(unknown)}")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if any(p < 2 for p in args.psi_grid):
        raise UsageError("every psi must be >= 2")
    names = _dataset_names(args.datasets)
    datasets = {
        name: _load(path, args.label_col, require_labels=True)
        for name, path in zip(names, args.datasets)
    }
    summary, per_cell, report = run_bench(
        datasets, methods, args.psi_grid, args.repeats, args.t, args.seed,
        normalize=args.normalize, n_trees=args.trees, n_jobs=args.jobs,
    )
    outputs = [
        (args.results_out, _rows_csv(summary, SUMMARY_COLUMNS)),
        (args.report_out, json.dumps(report, indent=2, sort_keys=True) + "\n"),
    ]
    if args.cells_out:
        outputs.append((args.cells_out, _rows_csv(per_cell, CELL_COLUMNS)))
    for path, text in outputs:
        _atomic_write(path, text)
    return EXIT_OK


# ---------------------------------------------------------------- grid


def grid_points(x_range: tuple[float, float], y_range: tuple[float, float], resolution: int) -> np.ndarray:
    """Mesh in row-major order: y ascending in the outer loop, x ascending inside."""
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def graymap(scores: np.ndarray, resolution: int) -> bytes:
    """Binary PGM (P5), 8-bit, brighter = higher score; the top row is the largest y.

    Scores are min-max scaled over the grid; a constant grid is mid-gray (128).
    """
    lo, hi = float(scores.min()), float(scores.max())
    if hi > lo:
        levels = np.rint((scores - lo) / (hi - lo) * 255.0)
    else:
        levels = np.full(scores.shape, 128.0)
    image = levels.astype(np.uint8).reshape(resolution, resolution)[::-1]
    header = f"P5\n{resolution} {resolution}\n255\n".encode("ascii")
    return header + image.tobytes()


def cmd_grid(args: argparse.Namespace) -> int:
    data = _load(args.input, args.label_col)
    if data.d != 2:
        raise DataError(f"grid export needs 2-D data, got d={data.d}")
    if args.resolution < 2:
        raise UsageError("--resolution must be >= 2")
    if args.psi > data.n:
        raise DataError(f"psi={args.psi} exceeds the number of rows n={data.n}")
    lo, hi = data.points.min(axis=0), data.points.max(axis=0)
    pad = 0.1 * np.where(hi > lo, hi - lo, 1.0)
    x_range = args.x_range or (float(lo[0] - pad[0]), float(hi[0] + pad[0]))
    y_range = args.y_range or (float(lo[1] - pad[1]), float(hi[1] + pad[1]))

    det = fit_detector(
        args.method, data, args.psi, t=args.t, seed=args.seed, normalize=args.normalize,
        n_trees=args.trees, n_jobs=args.jobs,
    )
    mesh = grid_points(x_range, y_range, args.resolution)
    scores = det.score(mesh)
    lines = ["x,y,score"]
    lines += [
        f"{format_float(x)},{format_float(y)},{format_float(s)}"
        for (x, y), s in zip(mesh, scores)
    ]
    outputs: list[tuple[str, str | bytes]] = [(args.out, "\n".join(lines) + "\n")]
    if args.pgm:
        outputs.append((args.pgm, graymap(scores, args.resolution)))
    for path, payload in outputs:
        _atomic_write(path, payload)
    return EXIT_OK


# ---------------------------------------------------------------- scalability


def time_fit_score(method: str, X: np.ndarray, psi: int, t: int, seed: int, n_jobs: int = 1) -> float:
    start = time.perf_counter()
    fit_score(method, X, psi, t=t, seed=seed, n_jobs=n_jobs)
    return time.perf_counter() - start


def run_scalability(
    methods: Sequence[str],
    sizes: Sequence[int],
    dims: Sequence[int],
    repeats: int,
    psi: int,
    t: int,
    seed: int,
    n_jobs: int = 1,
) -> list[dict]:
    rows = []
    for ci, (n, d) in enumerate((n, d) for n in sizes for d in dims):
        X = derive_rng(seed, ci, DOMAIN_SYNTH).normal(size=(n, d))
        for method in methods:
            times = [time_fit_score(method, X, psi, t, seed, n_jobs) for _ in range(repeats)]
            rows.append({
                "n": n, "d": d, "method": method,
                "median_seconds": statistics.median(times), "runs": times,
            })
            logger.info("n=%d d=%d %s: %.3fs", n, d, method, rows[-1]["median_seconds"])
    return rows


def cmd_scalability(args: argparse.Namespace) -> int:
    methods = [m for group in args.methods for m in group.split(",") if m]
    unknown = sorted(set(methods) - set(METHODS))
    if unknown:
        raise UsageError(f"unknown method(s): {', '.join(unknown)}")
    if min(args.sizes) < 1 or min(args.dims) < 1 or args.repeats < 1:
        raise UsageError("sizes, dims and repeats must be positive")
    if args.psi > min(args.sizes):
        raise UsageError(f"psi={args.psi} exceeds the smallest size {min(args.sizes)}")
    rows = run_scalability(
        methods, args.sizes, args.dims, args.repeats, args.psi, args.t, args.seed, args.jobs
    )
    _atomic_write(args.out, _rows_csv(rows, ("n", "d", "method", "median_seconds")))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iser", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_fit(p: argparse.ArgumentParser) -> None:
        p.add_argument("--t", type=int, default=200, help="partitionings (default 200)")
        p.add_argument("--trees", type=int, default=100, help="trees for iforest/iser-if")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--normalize", action="store_true", help="min-max scale features first")
        p.add_argument("--label-col", default=None,
                       help=f"label column (default: {DEFAULT_LABEL_COLUMN!r} if present)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", required=True, choices=[k.value for k in Kind])
    p.add_argument("--n-normal", type=int, default=500)
    p.add_argument("--n-anomaly", type=int, default=None, help="default: n_normal // 20")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--set", action="append", metavar="NAME=VALUE",
                   help=f"override a generator constant: {', '.join(GeneratorParams.names())}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="fit one method and score every row")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--input", required=True)
    p.add_argument("--psi", type=int, default=16)
    p.add_argument("--scores-out", required=True)
    p.add_argument("--metrics-out", default=None, help="default: <scores-out>.metrics.json")
    p.add_argument("--model-out", default=None, help="save the partition set (iser-a/iser-s)")
    common_fit(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="grid-search psi and compare methods")
    p.add_argument("--methods", required=True, action="append")
    p.add_argument("--datasets", required=True, nargs="+")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--psi-grid", type=_int_list, default=list(DEFAULT_PSI_GRID))
    p.add_argument("--results-out", required=True)
    p.add_argument("--report-out", required=True)
    p.add_argument("--cells-out", default=None, help="optional per (psi, repeat) CSV")
    common_fit(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("grid", help="score a 2-D mesh for boundary maps")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--input", required=True)
    p.add_argument("--psi", type=int, default=16)
    p.add_argument("--x-range", type=_range, default=None)
    p.add_argument("--y-range", type=_range, default=None)
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", default=None, help="also write a grayscale PGM heatmap")
    common_fit(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("scalability", help="time fit+score on Gaussian data")
    p.add_argument("--methods", required=True, action="append")
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--dims", type=_int_list, default=[1])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--psi", type=int, default=16)
    p.add_argument("--t", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scalability)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    if getattr(args, "seed", 0) < 0 or getattr(args, "seed", 0) >= 2**64:
        print("iser: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"iser: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, OSError) as exc:
        print(f"iser: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
