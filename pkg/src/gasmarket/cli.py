"""Command-line entry point.

Subcommands: ``train``, ``evaluate``, ``sweep``, ``analyze``, and
``fit-seasonal``.  Every command is a pure function of its config, flags,
seeds, and input files; rerunning reproduces outputs byte for byte except
for the ``meta.json`` timestamp sidecar.  Each prints a human-readable
table followed by one machine-readable JSON document on standard output.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime or
numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .analysis import (
    average_series,
    kde,
    labeled_log_diffs,
    load_price_csv,
    mean_ci,
    price_series_from_trace,
    seasonal_regression,
    silverman_bandwidth,
    volatility_std,
)
from .config import load_config, resolve_output_root
from .docio import write_json
from .errors import ConfigurationError, DataError, GasMarketError
from .harness import evaluate_checkpoint, sweep_sigma_s, train
from .market_env import EpisodeTrace
from .seasonality import (
    DEFAULT_HARMONICS,
    fit_coefficients,
    save_coefficients,
    seasonal_value,
)
from .svgplot import LineSeries, bar_chart, line_chart, save_svg

__all__ = ["main", "build_parser"]

_MONTH_NAMES = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def _print_table(rows, headers) -> None:
    rows = [[str(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(line)
    print("-" * len(line))
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def _print_json(doc) -> None:
    print()
    print(json.dumps(doc, indent=2, sort_keys=True))


def _metric_rows(report) -> list:
    rows = []
    for name in ("total_reward", "terminal_bank", "mean_sq_log_price_change",
                 "success_rate", "refill_month_inventory", "mean_price"):
        stat = getattr(report, name)
        lo, hi = stat.ci95()
        rows.append([name, f"{stat.mean:.6g}", f"{stat.se:.3g}",
                     f"[{lo:.6g}, {hi:.6g}]"])
    return rows


def _print_report(report) -> None:
    _print_table(_metric_rows(report), ["metric", "mean", "se", "ci95"])
    print(f"episodes: {report.n_episodes}")


def cmd_train(args) -> int:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    cfg = load_config(args.config, overrides)
    spec = cfg.spec
    if args.out:
        run_dir = args.out
    else:
        run_dir = os.path.join(
            resolve_output_root(None, cfg.output_root), spec.tag)
    result = train(spec, run_dir, resume_from=args.resume)
    if result.log_rows:
        steps = np.asarray([s for s, _ in result.log_rows], dtype=np.float64)
        rewards = np.asarray([r for _, r in result.log_rows])
        svg = line_chart(
            [LineSeries(steps, rewards, label="evaluation reward")],
            title=f"training curve ({spec.tag})",
            x_label="environment steps", y_label="mean episode reward")
        save_svg(os.path.join(run_dir, "training_curve.svg"), svg)
    print(f"run directory: {result.run_dir}")
    _print_report(result.report)
    _print_json({
        "run_dir": result.run_dir,
        "checkpoints": [{"step": c.step, "eval_reward": c.eval_reward,
                         "path": c.path} for c in result.checkpoints],
        "metrics": result.report.to_doc(),
    })
    return 0


def cmd_evaluate(args) -> int:
    report, traces = evaluate_checkpoint(
        args.checkpoint, args.episodes, seed=args.seed,
        workers=args.workers, sigma_s=args.sigma_s)
    _print_report(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, "metrics.json"), report.to_doc())
        for i, trace in enumerate(traces):
            trace.to_csv(os.path.join(args.out, f"trace_{i:03d}.csv"))
    _print_json(report.to_doc())
    return 0


def _parse_sigma_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(
                f"sigma grid {text!r} must be start:stop:step or a comma list")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigurationError(f"bad sigma grid {text!r}: {exc}") from exc
        if step <= 0 or stop < start:
            raise ConfigurationError(
                f"sigma grid {text!r} needs stop >= start and step > 0")
        count = int(round((stop - start) / step)) + 1
        grid = tuple(start + i * step for i in range(count)
                     if start + i * step <= stop + 1e-12)
    else:
        try:
            grid = tuple(float(p) for p in text.split(",") if p.strip())
        except ValueError as exc:
            raise ConfigurationError(f"bad sigma grid {text!r}: {exc}") from exc
    if not grid:
        raise ConfigurationError(f"sigma grid {text!r} is empty")
    return grid


def cmd_sweep(args) -> int:
    grid = _parse_sigma_grid(args.sigma_s)
    result = sweep_sigma_s(args.baseline, args.regulated, grid,
                           n_episodes=args.episodes, seed=args.seed,
                           workers=args.workers)
    rows = []
    for sigma, base, reg in zip(result.sigma_grid, result.baseline,
                                result.regulated):
        rows.append([f"{sigma:.4g}",
                     f"{base.success_rate.mean:.4f}",
                     f"{reg.success_rate.mean:.4f}",
                     f"{base.terminal_bank.mean:.6g}",
                     f"{reg.terminal_bank.mean:.6g}"])
    _print_table(rows, ["sigma_s", "success(base)", "success(reg)",
                        "bank(base)", "bank(reg)"])
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, "sweep.json"), result.to_doc())
        x = np.asarray(result.sigma_grid)
        for metric, fname, label in (
                ("success_rate", "sweep_success.svg", "market success rate"),
                ("terminal_bank", "sweep_bank.svg", "terminal bank")):
            series = []
            for name, reports in (("baseline", result.baseline),
                                  ("regulated", result.regulated)):
                means = np.asarray([getattr(r, metric).mean for r in reports])
                halves = np.asarray([1.96 * getattr(r, metric).se
                                     for r in reports])
                series.append(LineSeries(x, means, label=name,
                                         band=(means - halves, means + halves)))
            save_svg(os.path.join(args.out, fname),
                     line_chart(series, title=label,
                                x_label="supply shock volatility",
                                y_label=label))
    _print_json(result.to_doc())
    return 0


def _analysis_report(series_list, external=None) -> dict:
    averaged = (average_series(series_list) if len(series_list) > 1
                else series_list[0])
    diffs, months = labeled_log_diffs(averaged)
    pooled = np.concatenate([labeled_log_diffs(s)[0] for s in series_list])
    estimate = seasonal_regression(diffs, months)
    mean, half = mean_ci(pooled)
    report = {
        "n_series": len(series_list),
        "seasonal": estimate.to_doc(),
        "volatility_std_averaged": volatility_std(diffs),
        "volatility_std_pooled": volatility_std(pooled),
        "log_diff_mean_ci95": {"mean": mean, "half_width": half},
        "peak_month": int(np.argmax(estimate.coefficients) + 1),
    }
    if external is not None:
        ext_diffs, ext_months = labeled_log_diffs(external)
        ext_estimate = seasonal_regression(ext_diffs, ext_months)
        report["external"] = {
            "label": external.label,
            "seasonal": ext_estimate.to_doc(),
            "volatility_std": volatility_std(ext_diffs),
            "peak_month": int(np.argmax(ext_estimate.coefficients) + 1),
        }
    return report


def cmd_analyze(args) -> int:
    series_list = []
    for path in args.traces:
        trace = EpisodeTrace.from_csv(path)
        series_list.append(price_series_from_trace(
            trace, label=os.path.basename(path)))
    if not series_list:
        raise DataError("no trace files given")
    external = load_price_csv_file(args.external) if args.external else None
    report = _analysis_report(series_list, external)

    rows = [[_MONTH_NAMES[m], f"{c:.6g}", f"{s:.3g}"]
            for m, (c, s) in enumerate(zip(report["seasonal"]["coefficients"],
                                           report["seasonal"]["standard_errors"]))]
    _print_table(rows, ["month", "coefficient", "se"])
    print(f"volatility (averaged series): "
          f"{report['volatility_std_averaged']:.6g}")
    print(f"volatility (pooled diffs):    {report['volatility_std_pooled']:.6g}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, "analysis.json"), report)
        coef = np.asarray(report["seasonal"]["coefficients"])
        se = np.asarray(report["seasonal"]["standard_errors"])
        save_svg(os.path.join(args.out, "seasonality.svg"),
                 bar_chart(_MONTH_NAMES, coef, errors=1.96 * se,
                           title="seasonal mean log-price change",
                           y_label="mean log-price change"))
        pooled = np.concatenate(
            [labeled_log_diffs(s)[0] for s in series_list])
        if pooled.std(ddof=1) > 0.0:
            h = silverman_bandwidth(pooled)
            grid = np.linspace(pooled.min() - 3 * h, pooled.max() + 3 * h, 201)
            save_svg(os.path.join(args.out, "density.svg"),
                     line_chart([LineSeries(grid, kde(pooled, grid),
                                            label="simulated")],
                                title="log-price difference density",
                                x_label="log-price difference",
                                y_label="density"))
    _print_json(report)
    return 0


def load_price_csv_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return load_price_csv(text, label=os.path.basename(path))


def _read_profile(path: str) -> list[tuple[int, float]]:
    """(month, value) pairs from a 2-column CSV, tolerating one header row.

    Month labels 1..12 are treated as calendar months and shifted to the
    0-based index the fitting code expects; 0-based files pass through.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if rows:
        try:
            int(rows[0][0]), float(rows[0][1])
        except (ValueError, IndexError):
            rows = rows[1:]
    pairs = []
    for r in rows:
        if len(r) != 2:
            raise DataError(f"{path}: expected 2 columns, got {r!r}")
        try:
            pairs.append((int(r[0]), float(r[1])))
        except ValueError as exc:
            raise DataError(f"{path}: bad row {r!r}: {exc}") from exc
    if not pairs:
        raise DataError(f"{path}: no data rows")
    months = [m for m, _ in pairs]
    if min(months) >= 1 and max(months) <= 12:
        pairs = [(m - 1, v) for m, v in pairs]
    return pairs


def cmd_fit_seasonal(args) -> int:
    harmonics = DEFAULT_HARMONICS
    if args.harmonics:
        try:
            harmonics = tuple(int(k) for k in args.harmonics.split(","))
        except ValueError as exc:
            raise ConfigurationError(
                f"bad harmonics {args.harmonics!r}: {exc}") from exc
    pairs = _read_profile(args.profile)
    coefficients = fit_coefficients(pairs, harmonics)
    months = np.asarray([m for m, _ in pairs])
    values = np.asarray([v for _, v in pairs])
    residual = float(np.max(np.abs(
        seasonal_value(coefficients, months) - values)))
    rows = [[k, f"{a:.12g}", f"{b:.12g}"]
            for k, a, b in zip(coefficients.harmonics, coefficients.a,
                               coefficients.b)]
    _print_table(rows, ["harmonic", "cos", "sin"])
    print(f"max reconstruction residual: {residual:.3g}")
    if args.out:
        save_coefficients(args.out, coefficients)
        print(f"coefficients written to {args.out}")
    _print_json({
        "harmonics": list(coefficients.harmonics),
        "a": [float(v) for v in coefficients.a],
        "b": [float(v) for v in coefficients.b],
        "max_residual": residual,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasmarket",
        description="Seasonal gas market simulator with a learned storage "
                    "operator: training, evaluation, robustness sweeps, and "
                    "price-series analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an operator policy from a TOML config")
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--seed", type=int, help="shortcut for run.seed")
    p.add_argument("--out", help="run directory (default: output root / tag)")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint's deterministic policy")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON path")
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sigma-s", type=float, default=None,
                   help="override the supply shock volatility")
    p.add_argument("--out", help="directory for metrics.json and trace CSVs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="compare two checkpoints across supply volatility")
    p.add_argument("--baseline", required=True, help="baseline checkpoint")
    p.add_argument("--regulated", required=True, help="comparison checkpoint")
    p.add_argument("--sigma-s", required=True,
                   help="grid as start:stop:step or a comma list")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="directory for sweep.json and SVG charts")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="seasonality and volatility of price traces")
    p.add_argument("--traces", nargs="+", required=True,
                   help="episode trace CSV files")
    p.add_argument("--external", help="external monthly price CSV (ISO date, price)")
    p.add_argument("--out", help="directory for analysis.json and SVG charts")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit-seasonal",
                       help="fit harmonic coefficients to a monthly profile")
    p.add_argument("--profile", required=True,
                   help="CSV of month,value rows (calendar 1..12 or 0-based index)")
    p.add_argument("--harmonics", help="comma list, default 1,2,3,4,6")
    p.add_argument("--out", help="write the fitted coefficients CSV here")
    p.set_defaults(func=cmd_fit_seasonal)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GasMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
