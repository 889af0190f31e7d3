"""Command-line front end: ``doublevq {generate,fit,sweep,forecast,stability}``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from typing import Optional

import numpy as np

from . import __version__, datasets, dvq, selection, stability, svg
from .config import ConfigError, RunConfig, load_config, override
from .io import atomic_write
from .series import (SeriesError, TimeSeries, build_deformations, build_regressors,
                     parse_offsets, split_chronological, split_counts)
from .som import SomError, quantization_error

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run config; flags override its values")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default ./out)")


def _input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", dest="input_file", help="single-column CSV series")
    p.add_argument("--generate", dest="gen_kind", choices=datasets.KINDS,
                   help="use a synthetic series instead of --input")
    p.add_argument("--length", type=int, help="length of the generated series")
    p.add_argument("--gen-seed", type=int, help="generator seed (default: --seed)")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter (repeatable)")


def _lag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block", dest="d", type=int, help="block size d (values per step)")
    p.add_argument("--offsets", help="block offsets, e.g. 0,1,2,3,5,6 or 0-3,5,6")
    p.add_argument("--split", help="learn,valid,test as counts (4000,1000,100) or fractions")
    p.add_argument("--split-unit", dest="split_unit", type=int,
                   help="multiply split counts by this (e.g. 24 for daily blocks)")
    p.add_argument("--normalize", action="store_const", const=True, default=None,
                   help="z-score with learning-set statistics")
    p.add_argument("--epochs", type=int)
    p.add_argument("--radius-start", dest="radius_start", type=float)
    p.add_argument("--radius-end", dest="radius_end", type=float)
    p.add_argument("--init", choices=("sample", "pca_line"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="doublevq", description="Double vector quantization forecasting")
    parser.add_argument("--version", action="version", version=f"doublevq {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic benchmark series to CSV")
    _common(g)
    g.add_argument("--kind", required=True, choices=datasets.KINDS)
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    g.add_argument("--output", default="series.csv", help="file name inside --out-dir")

    f = sub.add_parser("fit", help="fit one model and write model.json")
    _common(f)
    _input(f)
    _lag(f)
    f.add_argument("--n1", type=int, help="regressor prototypes")
    f.add_argument("--n2", type=int, help="deformation prototypes")

    s = sub.add_parser("sweep", help="grid search (n1, n2) on the validation set, then refit")
    _common(s)
    _input(s)
    _lag(s)
    s.add_argument("--n1-grid", dest="grid_n1", help="e.g. 5:200:5 or 10,20,40")
    s.add_argument("--n2-grid", dest="grid_n2")
    s.add_argument("--val-horizon", dest="grid_horizon", type=int,
                   help="validation horizon in steps (default: whole validation set)")
    s.add_argument("--val-paths", dest="grid_paths", type=int)

    fc = sub.add_parser("forecast", help="Monte-Carlo forecast from a model file")
    _common(fc)
    _input(fc)
    fc.add_argument("--model", required=True)
    fc.add_argument("--split", help="as for sweep; the forecast starts after learn+valid")
    fc.add_argument("--split-unit", dest="split_unit", type=int)
    fc.add_argument("--origin", type=int, help="use the first ORIGIN values as history")
    fc.add_argument("--horizon", type=int, help="steps to simulate (d values each)")
    fc.add_argument("--paths", type=int)
    fc.add_argument("--levels", help="band quantiles, default 0.025,0.975")

    st = sub.add_parser("stability", help="drift, boundedness and occupancy diagnostics")
    _common(st)
    _input(st)
    st.add_argument("--model", required=True)
    st.add_argument("--split")
    st.add_argument("--split-unit", dest="split_unit", type=int)
    st.add_argument("--origin", type=int)
    st.add_argument("--scales", help="probe scale factors, default 2,5,10,50")
    st.add_argument("--horizon", dest="stab_horizon", type=int)
    st.add_argument("--paths", dest="stab_paths", type=int)
    st.add_argument("--steps", dest="stab_steps", type=int, help="occupancy walk length")
    st.add_argument("--margin", type=float)
    return parser


# ---------------------------------------------------------------------------

def _params(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: not a number: {value!r}") from None
    return out


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    values = {k: getattr(args, k, None) for k in
              ("seed", "jobs", "out_dir", "input_file", "d", "split_unit", "normalize",
               "epochs", "radius_start", "radius_end", "init", "n1", "n2", "grid_horizon",
               "grid_paths", "horizon", "paths", "stab_horizon", "stab_paths", "stab_steps",
               "margin")}
    try:
        if getattr(args, "offsets", None):
            values["offsets"] = parse_offsets(args.offsets)
        if getattr(args, "grid_n1", None):
            values["grid_n1"] = tuple(selection.parse_range(args.grid_n1))
        if getattr(args, "grid_n2", None):
            values["grid_n2"] = tuple(selection.parse_range(args.grid_n2))
        if getattr(args, "levels", None):
            values["levels"] = _floats(args.levels)
        if getattr(args, "scales", None):
            values["scales"] = _floats(args.scales)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    split = getattr(args, "split", None)
    if split:
        try:
            if "." in split:
                cfg = replace(cfg, split_fractions=_floats(split), split_counts=None)
            else:
                cfg = replace(cfg, split_counts=_ints(split), split_fractions=None)
        except ValueError:
            raise UsageError(f"--split: cannot parse {split!r}") from None
    if getattr(args, "gen_kind", None):
        gen = {"kind": args.gen_kind, "n": args.length,
               "seed": args.gen_seed if args.gen_seed is not None else
               (args.seed if args.seed is not None else cfg.seed),
               "params": _params(args.param)}
        if gen["n"] is None:
            raise UsageError("--generate needs --length")
        cfg = replace(cfg, generate=gen, input_file=None)
    elif values.get("input_file"):
        cfg = replace(cfg, generate=None)
    return override(cfg, **values).validate()


def _load_series(cfg: RunConfig) -> TimeSeries:
    if cfg.input_file:
        return datasets.load_csv(cfg.input_file)
    if cfg.generate:
        gen = dict(cfg.generate)
        return datasets.generate(datasets.GeneratorConfig(
            gen["kind"], int(gen["n"]), int(gen.get("seed", 0)), dict(gen.get("params") or {})))
    raise ConfigError("no input: give --input FILE or --generate KIND --length N")


def _split(cfg: RunConfig, series: TimeSeries):
    if cfg.split_counts:
        if len(cfg.split_counts) != 3:
            raise ConfigError("split needs three values: learn,valid,test")
        return split_counts(series, cfg.split_counts, cfg.split_unit)
    if cfg.split_fractions:
        if len(cfg.split_fractions) != 3:
            raise ConfigError("split needs three values: learn,valid,test")
        return split_chronological(series, *cfg.split_fractions)
    return None


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _write(path: str, text: str) -> None:
    atomic_write(path, text)
    print(f"wrote {path}")


def _json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _history(cfg: RunConfig, series: TimeSeries, origin: Optional[int], d: int):
    """History (values before the forecast origin) and the truth after it, if any."""
    if origin is None:
        parts = _split(cfg, series)
        origin = len(parts[0]) + len(parts[1]) if parts else len(series)
    if not 0 < origin <= len(series):
        raise SeriesError(f"origin {origin} outside the series (length {len(series)})")
    history = series.slice(0, origin)
    truth = series.values[origin:]
    return history, truth


# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _resolve(args)
    gen = datasets.GeneratorConfig(args.kind, args.length, cfg.seed, _params(args.param))
    series = datasets.generate(gen)
    _write(_out(cfg, args.output), datasets.series_csv(series))
    return EXIT_OK


def _fit_report(model: dvq.DvqModel, series: TimeSeries) -> dict:
    data = series
    if model.norm is not None:
        data = TimeSeries(model.norm.apply(series.values))
    regs = build_regressors(data, model.spec)
    defs = build_deformations(regs, model.spec)
    rows = model.transition.rows
    supported = model.transition.supported
    return {
        "n1": model.n1, "n2": model.n2, "p": model.spec.p, "spec": model.spec.to_dict(),
        "series_length": len(series),
        "regressors": len(regs),
        "deformations": len(defs),
        "quantization_error_regressors": quantization_error(model.reg_codebook, regs.vectors),
        "quantization_error_deformations": quantization_error(model.def_codebook, defs.vectors),
        "dead_regressor_units": model.reg_codebook.dead_units,
        "dead_deformation_units": model.def_codebook.dead_units,
        "empty_rows": [int(i) for i in np.flatnonzero(~supported)],
        "max_row_sum_error": float(np.max(np.abs(rows[supported].sum(axis=1) - 1.0))),
    }


def cmd_fit(args) -> int:
    cfg = _resolve(args)
    series = _load_series(cfg)
    parts = _split(cfg, series)
    learn = parts[0] if parts else series
    spec = cfg.lag_spec()
    model = dvq.fit(learn, spec, cfg.som_template(cfg.n1), cfg.som_template(cfg.n2),
                    seed=cfg.seed, normalize_series=cfg.normalize)
    report = _fit_report(model, learn)
    _write(_out(cfg, "model.json"), model.dumps())
    _write(_out(cfg, "fit_report.json"), _json(report))
    print(f"fitted n1={model.n1} n2={model.n2} p={spec.p} on {len(learn)} values; "
          f"dead units {len(report['dead_regressor_units'])}/"
          f"{len(report['dead_deformation_units'])}, empty rows {len(report['empty_rows'])}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    series = _load_series(cfg)
    parts = _split(cfg, series)
    if parts is None:
        parts = split_chronological(series, 0.6, 0.2, 0.2)
    learn, valid, _ = parts
    spec = cfg.lag_spec()
    grid = cfg.sweep_grid()
    template = cfg.som_template(1)
    t0 = time.perf_counter()
    result = selection.sweep(learn, valid, spec, grid, template, seed=cfg.seed, jobs=cfg.jobs,
                             normalize_series=cfg.normalize, progress=selection.stderr_progress)
    best = result.best
    model = selection.refit_best(learn, valid, spec, best, template, seed=cfg.seed,
                                 normalize_series=cfg.normalize)
    _write(_out(cfg, "sweep.csv"), result.to_csv())
    _write(_out(cfg, "sweep.svg"), svg.heatmap(grid.n1_values, grid.n2_values,
                                               result.sse_surface, best))
    _write(_out(cfg, "model.json"), model.dumps())
    failed = sum(1 for *_, st in result.rows() if st != "ok")
    print(f"best: n1={best[0]} n2={best[1]} sse={result.best_sse:.6g} "
          f"({len(grid.n1_values) * len(grid.n2_values)} cells, {failed} failed, "
          f"{time.perf_counter() - t0:.1f}s); refit on {len(learn) + len(valid)} values")
    return EXIT_OK


def _read_model(path: str) -> dvq.DvqModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise datasets.DataError(f"cannot read model file {path}: {exc}") from exc
    return dvq.DvqModel.loads(text)


def cmd_forecast(args) -> int:
    cfg = _resolve(args)
    model = _read_model(args.model)
    series = _load_series(cfg)
    history, truth = _history(cfg, series, args.origin, model.spec.d)
    ens = dvq.monte_carlo(model, history, cfg.horizon, cfg.paths, cfg.seed, jobs=cfg.jobs)
    summary = dvq.summarize(ens, cfg.levels)
    truth = truth[:ens.paths.shape[1]]
    _write(_out(cfg, "ensemble.csv"), dvq.ensemble_csv(ens))
    _write(_out(cfg, "summary.csv"), dvq.summary_csv(summary))
    tail = history.values[-min(len(history), 3 * model.spec.window):]
    _write(_out(cfg, "forecast.svg"), svg.trend_chart(
        summary.mean, summary.lower, summary.upper, truth if truth.size else None,
        title=f"{cfg.paths} simulations, horizon {cfg.horizon}", history=tail))
    line = (f"forecast: {ens.n_paths} paths x {ens.paths.shape[1]} values; "
            f"mean band width {float(np.mean(summary.width)):.6g}")
    if truth.size:
        cover = float(np.mean(summary.covers(truth)))
        line += f"; band covers {cover:.1%} of {truth.size} true values"
    print(line)
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = _resolve(args)
    model = _read_model(args.model)
    series = _load_series(cfg)
    history, _ = _history(cfg, series, args.origin, model.spec.d)
    report = stability.check_negative_drift_assumption(model, cfg.scales)
    ens = dvq.monte_carlo(model, history, cfg.stab_horizon, cfg.stab_paths, cfg.seed,
                          jobs=cfg.jobs)
    outside = stability.boundedness_check(ens, history, cfg.margin)
    runs = [stability.stationary_occupancy(model, history, cfg.stab_steps,
                                           seed=cfg.seed + i, training=history,
                                           margin=cfg.margin) for i in range(2)]
    bounded = {"paths": cfg.stab_paths, "horizon": cfg.stab_horizon, "margin": cfg.margin,
               "fraction_outside": outside}
    _write(_out(cfg, "stability.json"), stability.report_json(report, runs, bounded))
    print(report.table())
    print(f"boundary clusters PASS: {sum(c.verdict == 'PASS' for c in report.boundary)}"
          f"/{len(report.boundary)}")
    print(f"boundedness: {outside:.4%} of {ens.paths.size} simulated values outside "
          f"training range +/- {cfg.margin:g} x width")
    print(f"occupancy: total variation between two {cfg.stab_steps}-step walks = "
          f"{stability.total_variation(runs[0], runs[1]):.4f}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "sweep": cmd_sweep,
            "forecast": cmd_forecast, "stability": cmd_stability}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SeriesError, SomError, datasets.DataError, dvq.ModelFormatError, dvq.FitError,
            selection.SweepError, dvq.SimulationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
