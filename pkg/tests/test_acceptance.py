"""Acceptance suite: one PASS/FAIL line per criterion, listed in the terminal summary.

Groups and runtime budgets:
  1 structural exactness (< 5 s)     4 scaled load analog (< 5 min)
  2 oracle equivalence (< 30 s)      5 stability (< 2 min)
  3 scaled chaotic analog (< 5 min)  6 sweep-surface sanity (< 3 min)
"""

import time
from collections import Counter

import numpy as np
import pytest

from conftest import make_model, record
from doublevq import cli, datasets, dvq, selection, som, stability
from doublevq.series import (LagSpec, TimeSeries, autocorrelation, build_deformations,
                             build_regressors, split_counts)
from doublevq.som import SomConfig

# Scenario settings, fixed before any acceptance run.
MG_SEED, MG_SPLIT, MG_OFFSETS = 7, (4000, 1000, 100), (0, 1, 2, 3, 5, 6)
MG_GRID = tuple(range(10, 61, 10))
LOAD_SEED, LOAD_DAYS, LOAD_OFFSETS = 0, (600, 200, 40), (0, 1, 2, 6, 7)
LOAD_GRID = (5, 10, 20, 40)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# ---------------------------------------------------------------------------
# 1. structural exactness

def test_1_structural(tmp_path):
    with Timer() as t:
        rng = np.random.default_rng(0)
        n, p = 500, 6
        x = rng.integers(0, 256, size=n).astype(float)     # integer samples, like laser data
        spec = LagSpec.contiguous(p)
        regs = build_regressors(x, spec)
        defs = build_deformations(regs, spec)
        counts_ok = len(regs) == n - p + 1 and len(defs) == n - p
        recon_ok = np.array_equal(regs.vectors[:-1] + defs.vectors, regs.vectors[1:])
        spec12 = LagSpec(1, MG_OFFSETS)
        r12 = build_regressors(x, spec12)
        recon_ok &= np.array_equal(r12.vectors[:-1] + build_deformations(r12, spec12).vectors,
                                   r12.vectors[1:])

        model = dvq.fit(TimeSeries(x), spec, SomConfig(8), SomConfig(8), seed=1)
        tm = model.transition
        ok = tm.supported
        rows_ok = bool(np.all(np.abs(tm.rows[ok].sum(axis=1) - 1) <= 1e-9)
                       and np.array_equal(tm.rows[ok], tm.counts[ok] / tm.row_support[ok, None]))

        dm = make_model([[0.0, 0.0]], [[0.0, 0.0], [-2.0, 0.0]], [[1, 1]])
        drift_ok = stability.drift(dm, [3.0, 4.0], 0) == -4.0

        outputs = {}
        for label, jobs in (("a", 1), ("b", 1), ("c", 8)):
            out = tmp_path / label
            args = ["--generate", "sine_noise", "--length", "600", "--seed", "5",
                    "--jobs", str(jobs), "--out-dir", str(out)]
            assert cli.main(["fit", *args, "--offsets", "0,1", "--n1", "6", "--n2", "5"]) == 0
            assert cli.main(["forecast", "--model", str(out / "model.json"), *args,
                             "--horizon", "30", "--paths", "40"]) == 0
            outputs[label] = [(out / f).read_bytes()
                              for f in ("model.json", "ensemble.csv", "summary.csv")]
        det_ok = outputs["a"] == outputs["b"] == outputs["c"]

    results = [
        record("1a count law n-p+1 / n-p", counts_ok, f"{len(regs)} regressors, {len(defs)} "
               f"deformations for n={n}, p={p}"),
        record("1b reconstruction bit-exact", bool(recon_ok), "integer-valued series, "
               "contiguous and gapped lag specs"),
        record("1c transition rows stochastic, counts/support exact", rows_ok,
               f"max |row sum - 1| = {np.max(np.abs(tm.rows[ok].sum(axis=1) - 1)):.1e}"),
        record("1d drift hand case x=[3,4] -> -4", drift_ok, "closed form"),
        record("1e byte-identical outputs (repeat, jobs 1 vs 8)", det_ok,
               "model.json, ensemble.csv, summary.csv"),
        record("1  runtime < 5 s", t.elapsed < 5, f"{t.elapsed:.2f} s"),
    ]
    assert all(results)


# ---------------------------------------------------------------------------
# 2. oracle equivalence

def lloyd_step(protos, data):
    out = protos.copy()
    labels = np.array([int(np.argmin([np.sum((v - c) ** 2) for c in protos])) for v in data])
    for i in range(len(protos)):
        if np.any(labels == i):
            out[i] = data[labels == i].mean(axis=0)
    return out


def test_2_oracles():
    with Timer() as t:
        alt = TimeSeries(np.arange(300) % 2)
        spec = LagSpec(1, (0, 1))
        learn, valid = split_counts(alt, (200, 100))
        model = dvq.fit(learn, spec, SomConfig(2), SomConfig(2), seed=0)
        regs = build_regressors(learn, spec)
        defs = build_deformations(regs, spec)
        brute = np.zeros((2, 2), dtype=int)
        for (r, y), c in Counter((tuple(r), tuple(y)) for r, y in
                                 zip(regs.vectors[:-1], defs.vectors)).items():
            brute[som.bmu(model.reg_codebook, r), som.bmu(model.def_codebook, y)] += c
        table_ok = np.array_equal(model.transition.counts, brute)
        path = dvq.simulate_path(model, learn, 100, rng=3)
        alt_ok = np.array_equal(path, valid.values)
        val_sse = selection.validation_score(model, learn, valid, n_paths=50, seed=1)

        rng = np.random.default_rng(42)
        data = rng.normal(size=(1000, 2))
        protos = data[rng.choice(1000, 12, replace=False)]
        lloyd_err = float(np.max(np.abs(som.batch_step(protos, data, 0.0)
                                        - lloyd_step(protos, data))))

        skewed_row = [12, 0, 0, 0, 0, 0, 23, 66]
        tm = make_model([[0.0]], [[float(j)] for j in range(8)], [skewed_row], offsets=(0,))
        u = np.random.default_rng(2024).random(100_000)
        draws = [dvq.sample_deformation(tm, 0, v) for v in u[:1000]]   # scalar path
        draws = np.concatenate([draws, np.searchsorted(tm.transition.cdf()[0], u[1000:],
                                                       side="right")])
        freq = np.bincount(draws, minlength=8) / draws.size
        dev = float(np.max(np.abs(freq - tm.transition.rows[0])))

    results = [
        record("2a alternating series: transition equals brute-force table", table_ok,
               f"counts {model.transition.counts.tolist()}"),
        record("2b alternating series: forecast exact, validation SSE = 0",
               bool(alt_ok and val_sse == 0.0), f"SSE {val_sse}"),
        record("2c batch SOM radius 0 equals Lloyd step (<= 1e-9)", lloyd_err <= 1e-9,
               f"max deviation {lloyd_err:.1e}"),
        record("2d sampler on a skewed 8-cluster row within +/-0.01", dev <= 0.01,
               f"max deviation {dev:.4f}"),
        record("2  runtime < 30 s", t.elapsed < 30, f"{t.elapsed:.2f} s"),
    ]
    assert all(results)


# ---------------------------------------------------------------------------
# 3 and 6. chaotic analog (Mackey-Glass standing in for the laser series)

@pytest.fixture(scope="module")
def mackey_glass():
    with Timer() as t:
        n = sum(MG_SPLIT)
        series = datasets.generate(datasets.GeneratorConfig("mackey_glass", n, MG_SEED))
        learn, valid, test = split_counts(series, MG_SPLIT)
        spec = LagSpec(1, MG_OFFSETS)
        grid = selection.SweepGrid(MG_GRID, MG_GRID, horizon=100, n_paths=100)
        template = SomConfig(1)
        sweep = selection.sweep(learn, valid, spec, grid, template, seed=0)
        trivial = selection.sweep(learn, valid, spec, selection.SweepGrid((1,), (1,), 100, 100),
                                  template, seed=0)
        model = selection.refit_best(learn, valid, spec, sweep.best, template, seed=0)
        history = learn.concat(valid)
        ens = dvq.monte_carlo(model, history, 100, 1000, master_seed=0)
    return dict(series=series, learn=learn, valid=valid, test=test, sweep=sweep,
                trivial=trivial, model=model, history=history, ens=ens, elapsed=t.elapsed)


@pytest.mark.slow
def test_3_chaotic_analog(mackey_glass):
    mg = mackey_glass
    summary = dvq.summarize(mg["ens"])
    truth = mg["test"].values
    sse10 = selection.sse(summary.mean[:10], truth[:10])
    persist10 = selection.sse(np.full(10, mg["history"].values[-1]), truth[:10])
    cover = float(np.mean(summary.covers(truth)))
    sse11 = mg["trivial"].best_sse
    best = mg["sweep"].best_sse
    results = [
        record("3a short-horizon SSE (10 steps) <= persistence", sse10 <= persist10,
               f"{sse10:.4g} vs {persist10:.4g}; best (n1, n2) = {mg['sweep'].best}"),
        record("3b 95% band covers >= 80% of 100 test values", cover >= 0.8,
               f"coverage {cover:.2f}"),
        record("3c (1,1) validation SSE >= selected model's", sse11 >= best,
               f"{sse11:.4g} vs {best:.4g}"),
        record("3  runtime < 5 min", mg["elapsed"] < 300, f"{mg['elapsed']:.1f} s"),
    ]
    assert all(results)


@pytest.mark.slow
def test_6_sweep_surface(mackey_glass):
    surface = mackey_glass["sweep"].sse_surface
    complete = bool(np.all(np.isfinite(surface)))
    lo, med = float(surface.min()), float(np.median(surface))
    results = [
        record("6a SSE surface defined on every grid cell", complete,
               f"{surface.size} cells, {int(np.sum(~np.isfinite(surface)))} failed"),
        record("6b surface minimum strictly below median", lo < med,
               f"min {lo:.4g}, median {med:.4g}"),
        record("6  runtime < 3 min", mackey_glass["elapsed"] < 180,
               f"{mackey_glass['elapsed']:.1f} s (sweep + refit + ensemble)"),
    ]
    assert all(results)


# ---------------------------------------------------------------------------
# 4. load analog (hourly series, 24-value blocks, 120-dimensional regressors)

@pytest.mark.slow
def test_4_load_analog():
    with Timer() as t:
        n = 24 * sum(LOAD_DAYS)
        series = datasets.generate(datasets.GeneratorConfig("synthetic_load", n, LOAD_SEED))
        learn, valid, test = split_counts(series, LOAD_DAYS, unit=24)
        spec = LagSpec(24, LOAD_OFFSETS)
        assert spec.p == 120
        grid = selection.SweepGrid(LOAD_GRID, LOAD_GRID, horizon=LOAD_DAYS[2], n_paths=50)
        sweep = selection.sweep(learn, valid, spec, grid, SomConfig(1), seed=0)
        model = selection.refit_best(learn, valid, spec, sweep.best, SomConfig(1), seed=0)
        ens = dvq.monte_carlo(model, learn.concat(valid), LOAD_DAYS[2], 200, master_seed=0)
        summary = dvq.summarize(ens)
    acf = autocorrelation(summary.mean, 24)
    cover = float(np.mean(summary.covers(test.values)))
    results = [
        record("4a ensemble-mean autocorrelation at lag 24 > 0.8", acf > 0.8,
               f"{acf:.3f}; best (n1, n2) = {sweep.best}"),
        record("4b band covers >= 80% of 960 test values (40 days)", cover >= 0.8,
               f"coverage {cover:.2f}"),
        record("4  runtime < 5 min", t.elapsed < 300, f"{t.elapsed:.1f} s"),
    ]
    assert all(results)


# ---------------------------------------------------------------------------
# 5. stability

@pytest.mark.slow
def test_5_stability(mackey_glass):
    with Timer() as t:
        mg = mackey_glass
        ens = dvq.monte_carlo(mg["model"], mg["history"], 500, 200, master_seed=1)
        outside = stability.boundedness_check(ens, mg["history"], margin=0.5)

        sine = datasets.generate(datasets.GeneratorConfig("sine_noise", 2000, 1))
        sine_model = dvq.fit(sine, LagSpec(1, (0, 1)), SomConfig(12), SomConfig(8), seed=0)
        report = stability.check_negative_drift_assumption(sine_model)
        at50 = [c.probes[-1]["drift"] for c in report.boundary]

        runs = [stability.stationary_occupancy(mg["model"], mg["history"], 100_000, seed=s)
                for s in (0, 1)]
        tv = stability.total_variation(*runs)
    results = [
        record("5a >= 99% of simulated values within training range +/- 50%",
               outside <= 0.01, f"{outside:.2%} outside (200 paths x 500 steps)"),
        record("5b sine model: every boundary cluster PASSes at scale 50", report.all_pass,
               f"{len(report.boundary)} boundary clusters, max drift at s=50 "
               f"{max(at50):.4g}"),
        record("5c occupancy of two 1e5-step walks: TV distance < 0.05", tv < 0.05,
               f"TV {tv:.4f}"),
        record("5  runtime < 2 min", t.elapsed < 120, f"{t.elapsed:.1f} s"),
    ]
    assert all(results)
