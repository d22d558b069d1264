"""Dataset I/O, run configuration, and the command-line interface.

Datasets are rectangular CSV files: the header row carries the time labels
(for example years), the first column carries the within-curve grid labels
(for example ages), and the body holds the curve values. Time labels are
rescaled to ``n / N`` on load; the original labels are kept for output.

Subcommands: ``detrend``, ``benchmark``, ``forecast``, ``simulate``.
Flags mirror the run-configuration fields; a ``key=value`` config file can
set any of them, with explicit flags taking precedence. The output
directory may also come from the ``FTSTREND_OUTPUT_DIR`` environment
variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .evaluation import run_benchmark
from .forecast_pipeline import ForecastConfig, compare_forecasts
from .fts_sim import FARProcessSpec, TrendSurface, simulate_scenario
from .smoothing import joint_lambda_scales, select_lambdas
from .splines import make_basis
from .tensor_trend import GridFunctionSeries, detrend, eval_trend, fit_trend

__all__ = [
    "DatasetError",
    "RunConfig",
    "load_dataset",
    "save_dataset",
    "command_detrend",
    "command_benchmark",
    "command_forecast",
    "command_simulate",
    "main",
]

_OUTPUT_DIR_ENV = "FTSTREND_OUTPUT_DIR"


class DatasetError(ValueError):
    """Raised for malformed dataset files, citing the offending line."""


@dataclass(frozen=True)
class RunConfig:
    """Configuration shared by the CLI commands."""

    k1: int = 10
    k2: int = 15
    lambda_s: float = None
    lambda_t: float = None
    horizon: int = 4
    r: int = 4
    p_max: int = 5
    replications: int = 100
    base_seed: int = 1
    output_dir: str = "."
    n_values: tuple = (300,)
    trends: tuple = ("T1", "T2", "T3", "T4", "T5", "T6")
    estimators: tuple = ("TPS", "Lin", "Naiv", "Ker")

    def __post_init__(self):
        for name in ("k1", "k2", "horizon", "r", "p_max", "replications"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("lambda_s", "lambda_t"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be nonnegative")


def load_dataset(path: str, rescale_time: bool = True) -> GridFunctionSeries:
    """Read a dataset CSV into a grid function series.

    With ``rescale_time`` (the default) the time labels are mapped to
    ``n / N`` in file order; otherwise they are parsed as numbers and used
    directly, which requires them to lie in (0, 1] and increase.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DatasetError(f"{path}, line 1: need a grid column and at least one time column")
        t_labels = [cell.strip() for cell in header[1:]]
        if len(set(t_labels)) != len(t_labels):
            raise DatasetError(f"{path}, line 1: duplicate time labels")
        n_cols = len(header)
        s_labels, body = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise DatasetError(
                    f"{path}, line {line_no}: expected {n_cols} cells, found {len(row)}"
                )
            s_labels.append(row[0].strip())
            parsed = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DatasetError(
                        f"{path}, line {line_no}, column {col}: non-numeric cell {cell!r}"
                    ) from None
            body.append(parsed)
    if not body:
        raise DatasetError(f"{path}: no data rows")
    if len(set(s_labels)) != len(s_labels):
        raise DatasetError(f"{path}: duplicate grid labels")
    try:
        s_grid = np.array([float(label) for label in s_labels])
    except ValueError as exc:
        raise DatasetError(f"{path}: non-numeric grid label ({exc})") from None
    if np.any(np.diff(s_grid) <= 0):
        raise DatasetError(f"{path}: grid labels must be strictly increasing")
    values = np.array(body)
    N = values.shape[1]
    if rescale_time:
        t_grid = np.arange(1, N + 1) / N
    else:
        try:
            t_grid = np.array([float(label) for label in t_labels])
        except ValueError as exc:
            raise DatasetError(f"{path}: non-numeric time label ({exc})") from None
    try:
        return GridFunctionSeries(
            values,
            s_grid,
            t_grid,
            (float(s_grid[0]), float(s_grid[-1])),
            s_labels=tuple(s_labels),
            t_labels=tuple(t_labels),
        )
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def save_dataset(series: GridFunctionSeries, path: str, values: np.ndarray = None) -> None:
    """Write a series (or a replacement value matrix) in dataset layout.

    Floats are written with ``repr`` so a save/load round trip is
    bitwise exact.
    """
    values = series.values if values is None else values
    t_labels = series.t_labels or tuple(repr(float(t)) for t in series.t_grid)
    s_labels = series.s_labels or tuple(repr(float(s)) for s in series.s_grid)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["s", *t_labels])
        for i, label in enumerate(s_labels):
            writer.writerow([label, *(repr(float(v)) for v in values[i])])


def _write_long_format(path: str, s_grid, t_grid, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["s", "t", "value"])
        for j, t in enumerate(t_grid):
            for i, s in enumerate(s_grid):
                writer.writerow([repr(float(s)), repr(float(t)), repr(float(values[i, j]))])


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _out(config: RunConfig, name: str) -> str:
    os.makedirs(config.output_dir, exist_ok=True)
    return os.path.join(config.output_dir, name)


def command_detrend(config: RunConfig, data: GridFunctionSeries) -> list:
    """Fit, remove, and export the trend surface of a dataset.

    Writes the trend and residual matrices in dataset layout, long-format
    plot tables for both surfaces, and a JSON file with the selected
    smoothing parameters and effective degrees of freedom.
    """
    lam_s, lam_t = config.lambda_s, config.lambda_t
    if lam_s is None or lam_t is None:
        basis_s = make_basis(data.s_domain[0], data.s_domain[1], config.k1)
        basis_t = make_basis(0.0, 1.0, config.k2)
        scale_s, scale_t = joint_lambda_scales(data)
        sel_s, sel_t = select_lambdas(
            data, basis_s, basis_t, scale_s=scale_s, scale_t=scale_t
        )
        lam_s = sel_s if lam_s is None else lam_s
        lam_t = sel_t if lam_t is None else lam_t
    fit = fit_trend(data, config.k1, config.k2, lam_s, lam_t)
    trend_values = eval_trend(fit, data.s_grid, data.t_grid)
    residuals = detrend(data, fit)

    written = []
    path = _out(config, "trend_surface.csv")
    save_dataset(data, path, values=trend_values)
    written.append(path)
    path = _out(config, "residuals.csv")
    save_dataset(residuals, path)
    written.append(path)
    path = _out(config, "selection.json")
    _write_json(
        path,
        {
            "lambda_s": fit.lambda_s,
            "lambda_t": fit.lambda_t,
            "edf": fit.edf,
            "k1": config.k1,
            "k2": config.k2,
            "ridge_used": fit.ridge_used,
        },
    )
    written.append(path)
    path = _out(config, "trend_long.csv")
    _write_long_format(path, data.s_grid, data.t_grid, trend_values)
    written.append(path)
    path = _out(config, "residuals_long.csv")
    _write_long_format(path, data.s_grid, data.t_grid, residuals.values)
    written.append(path)
    return written


def command_benchmark(config: RunConfig) -> list:
    """Run the simulation benchmark and export rows, summary, and errors."""
    trends = [TrendSurface(t) for t in config.trends]
    report = run_benchmark(
        trends,
        list(config.estimators),
        list(config.n_values),
        config.replications,
        config.base_seed,
        k1=config.k1,
        k2=config.k2,
    )
    written = []
    path = _out(config, "benchmark_rows.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["trend", "estimator", "N", "seed", "ise_t", "ise_beta", "error"])
        for row in report.rows:
            writer.writerow(
                [
                    row.trend_id,
                    row.estimator_id,
                    row.N,
                    row.seed,
                    repr(row.ise_t),
                    repr(row.ise_beta),
                    row.error or "",
                ]
            )
    written.append(path)
    path = _out(config, "benchmark_summary.json")
    _write_json(
        path,
        {
            "base_seed": config.base_seed,
            "k1": config.k1,
            "k2": config.k2,
            "replications": config.replications,
            "cells": report.summarize(),
        },
    )
    written.append(path)
    failures = [
        {"trend": r.trend_id, "estimator": r.estimator_id, "N": r.N, "seed": r.seed, "error": r.error}
        for r in report.rows
        if r.error
    ]
    if failures:
        path = _out(config, "benchmark_errors.json")
        _write_json(path, {"failures": failures})
        written.append(path)
    return written


def command_forecast(config: RunConfig, data: GridFunctionSeries) -> list:
    """Hold out the trailing curves, forecast both ways, export results."""
    comparison = compare_forecasts(
        data,
        config.horizon,
        ForecastConfig(
            k1=config.k1,
            k2=config.k2,
            r=config.r,
            p_max=config.p_max,
            lambda_s=config.lambda_s,
            lambda_t=config.lambda_t,
        ),
    )
    holdout_labels = (data.t_labels or tuple(repr(float(t)) for t in data.t_grid))[
        data.N - config.horizon :
    ]
    written = []
    for name, matrix in [
        ("forecast_truth.csv", comparison.truth),
        ("forecast_with_trend.csv", comparison.with_trend),
        ("forecast_without_trend.csv", comparison.without_trend),
    ]:
        path = _out(config, name)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["s", *holdout_labels])
            for i in range(data.m):
                writer.writerow(
                    [repr(float(data.s_grid[i])), *(repr(float(v)) for v in matrix[i])]
                )
        written.append(path)
    path = _out(config, "forecast_l1.json")
    _write_json(
        path,
        {
            "horizon": comparison.horizon,
            "l1_with_trend": comparison.l1_with,
            "l1_without_trend": comparison.l1_without,
            **(comparison.details or {}),
        },
    )
    written.append(path)
    path = _out(config, "forecast_long.csv")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["s", "step", "truth", "with_trend", "without_trend"])
        for j in range(comparison.horizon):
            for i in range(data.m):
                writer.writerow(
                    [
                        repr(float(data.s_grid[i])),
                        j + 1,
                        repr(float(comparison.truth[i, j])),
                        repr(float(comparison.with_trend[i, j])),
                        repr(float(comparison.without_trend[i, j])),
                    ]
                )
    written.append(path)
    return written


def command_simulate(config: RunConfig, trend: str, N: int) -> list:
    """Write one synthetic scenario dataset (trend plus FAR(1) noise)."""
    series = simulate_scenario(TrendSurface(trend), FARProcessSpec(seed=config.base_seed), N)
    path = _out(config, f"simulated_{trend}_N{N}_seed{config.base_seed}.csv")
    save_dataset(series, path)
    return [path]


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _parse_config_file(path: str) -> dict:
    updates = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DatasetError(f"{path}, line {line_no}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise DatasetError(f"{path}, line {line_no}: unknown key {key!r}")
            updates[key] = value
    return updates


def _coerce(key: str, value: str):
    if key in ("trends", "estimators"):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    if key == "n_values":
        return tuple(int(part) for part in value.split(",") if part.strip())
    if key in ("lambda_s", "lambda_t"):
        return float(value)
    if key == "output_dir":
        return value
    return int(value)


def _build_config(args: argparse.Namespace) -> RunConfig:
    settings = {}
    if getattr(args, "config", None):
        for key, value in _parse_config_file(args.config).items():
            settings[key] = _coerce(key, value)
    env_dir = os.environ.get(_OUTPUT_DIR_ENV)
    if env_dir and "output_dir" not in settings:
        settings["output_dir"] = env_dir
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return RunConfig(**settings)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--k1", type=int, help="basis functions along the curve coordinate")
    parser.add_argument("--k2", type=int, help="basis functions along time")
    parser.add_argument("--lambda-s", dest="lambda_s", type=float, help="override s-penalty")
    parser.add_argument("--lambda-t", dest="lambda_t", type=float, help="override t-penalty")
    parser.add_argument("--base-seed", dest="base_seed", type=int, help="seed of the first replication")
    parser.add_argument("--output-dir", dest="output_dir", help="directory for outputs")


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftstrend",
        description="Trend estimation, benchmarking, and forecasting for functional time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detrend", help="fit and remove the trend surface of a dataset")
    p.add_argument("--data", required=True, help="dataset CSV path")
    _add_common_flags(p)

    p = sub.add_parser("benchmark", help="run the Monte Carlo estimator comparison")
    p.add_argument("--trends", type=lambda v: _coerce("trends", v), help="comma-separated trend ids")
    p.add_argument(
        "--estimators", type=lambda v: _coerce("estimators", v), help="comma-separated estimator ids"
    )
    p.add_argument(
        "--n-values", dest="n_values", type=lambda v: _coerce("n_values", v),
        help="comma-separated sample sizes",
    )
    p.add_argument("--replications", type=int, help="replications per cell")
    _add_common_flags(p)

    p = sub.add_parser("forecast", help="holdout forecast comparison on a dataset")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--holdout", dest="horizon", type=int, help="curves held out (forecast horizon)")
    p.add_argument("--r", type=int, help="number of principal components")
    p.add_argument("--p-max", dest="p_max", type=int, help="maximum autoregressive order")
    _add_common_flags(p)

    p = sub.add_parser("simulate", help="write one synthetic scenario dataset")
    p.add_argument("--trend", default="T1", help="trend surface id (T1..T6)")
    p.add_argument("--n", type=int, default=300, help="number of curves")
    _add_common_flags(p)

    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_config(args)
        if args.command == "detrend":
            written = command_detrend(config, load_dataset(args.data))
        elif args.command == "benchmark":
            written = command_benchmark(config)
        elif args.command == "forecast":
            written = command_forecast(config, load_dataset(args.data))
        elif args.command == "simulate":
            written = command_simulate(config, args.trend, args.n)
        else:  # pragma: no cover
            parser.error(f"unknown command {args.command!r}")
    except (DatasetError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
