"""Validation-based choice of the two codebook sizes."""

from __future__ import annotations

import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as rngmod
from .dvq import DvqModel, fit, monte_carlo, summarize
from .series import LagSpec, TimeSeries
from .som import SomConfig



class SweepError(RuntimeError):
    pass


def sse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if predicted.size != actual.size:
        raise ValueError(f"length mismatch: {predicted.size} predictions, {actual.size} actuals")
    if predicted.size == 0:
        raise ValueError("sse needs at least one value")
    diff = actual - predicted
    return float(diff @ diff)


def parse_range(text: str) -> list:
    """``"5:200:5"`` -> 5, 10, ..., 200; ``"2,4,8"`` -> [2, 4, 8]; ``"7"`` -> [7]."""
    text = str(text).strip()
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        if len(parts) != 3 or parts[2] <= 0 or parts[0] > parts[1]:
            raise ValueError(f"bad range {text!r}; expected start:stop[:step]")
        return list(range(parts[0], parts[1] + 1, parts[2]))
    return [int(v) for v in text.split(",") if v.strip()]


@dataclass(frozen=True)
class SweepGrid:
    n1_values: tuple
    n2_values: tuple
    horizon: Optional[int] = None     # steps (d-blocks); None -> whole validation segment
    n_paths: int = 100

    def __post_init__(self):
        n1 = tuple(int(v) for v in self.n1_values)
        n2 = tuple(int(v) for v in self.n2_values)
        if not n1 or not n2:
            raise ValueError("sweep grid axes must be non-empty")
        if min(n1) < 1 or min(n2) < 1:
            raise ValueError("prototype counts must be >= 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        object.__setattr__(self, "n1_values", n1)
        object.__setattr__(self, "n2_values", n2)


@dataclass
class SweepResult:
    grid: SweepGrid
    sse_surface: np.ndarray          # (len(n1_values), len(n2_values)); inf marks a failed cell
    status: list                     # per cell: "ok" or the failure message
    diagnostics: dict = field(default_factory=dict)   # (n1, n2) -> dict

    @property
    def best(self) -> tuple:
        return _argbest(self.grid, self.sse_surface)

    @property
    def best_sse(self) -> float:
        n1, n2 = self.best
        return float(self.sse_surface[self.grid.n1_values.index(n1),
                                      self.grid.n2_values.index(n2)])

    def rows(self):
        for a, n1 in enumerate(self.grid.n1_values):
            for b, n2 in enumerate(self.grid.n2_values):
                yield n1, n2, float(self.sse_surface[a, b]), self.status[a][b]

    def to_csv(self) -> str:
        lines = ["n1,n2,sse,status"]
        for n1, n2, value, status in self.rows():
            status = status.replace(",", ";").replace("\n", " ")
            lines.append(f"{n1},{n2},{value!r},{status}")
        return "\n".join(lines) + "\n"


def _argbest(grid: SweepGrid, surface: np.ndarray) -> tuple:
    best = None
    for a, n1 in enumerate(grid.n1_values):
        for b, n2 in enumerate(grid.n2_values):
            value = surface[a, b]
            if not math.isfinite(value):
                continue
            key = (value, n1 + n2, n1)
            if best is None or key < best[0]:
                best = (key, (n1, n2))
    if best is None:
        raise SweepError("every sweep cell failed")
    return best[1]


def validation_score(model: DvqModel, history, validation, horizon: Optional[int] = None,
                     n_paths: int = 100, seed: int = 0, jobs: int = 1) -> float:
    """SSE between the ensemble-mean path and the validation values.

    The walk starts from the last regressor of ``history`` (the learning
    set) and runs ``horizon`` steps, i.e. ``horizon * d`` values.
    """
    truth = validation.values if isinstance(validation, TimeSeries) else np.asarray(validation)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    d = model.spec.d
    if horizon is None:
        horizon = truth.size // d
    if horizon < 1 or horizon * d > truth.size:
        raise ValueError(f"validation segment of {truth.size} values cannot cover "
                         f"horizon {horizon} with block size {d}")
    ens = monte_carlo(model, history, horizon, n_paths, seed, jobs=jobs)
    return sse(summarize(ens).mean if n_paths > 1 else ens.paths[0], truth[:horizon * d])


def _cell_config(template: SomConfig, k: int) -> SomConfig:
    return template.with_k(k)


def sweep(learn: TimeSeries, valid: TimeSeries, spec: LagSpec, grid: SweepGrid,
          som_template: SomConfig, seed: int = 0, jobs: int = 1,
          normalize_series: bool = False,
          progress: Optional[Callable[[str], None]] = None) -> SweepResult:
    """Fit and score one model per (n1, n2) cell.

    Cell (n1, n2) derives both its SOM seeds and its validation stream from
    ``(seed, n1, n2)``, so the surface does not depend on ``jobs``.
    """
    cells = [(a, b, n1, n2) for a, n1 in enumerate(grid.n1_values)
             for b, n2 in enumerate(grid.n2_values)]

    def run(cell):
        a, b, n1, n2 = cell
        cell_seed = rngmod.derive_seed(seed, n1, n2)
        try:
            model = fit(learn, spec, _cell_config(som_template, n1),
                        _cell_config(som_template, n2), seed=cell_seed,
                        normalize_series=normalize_series)
            score = validation_score(model, learn, valid, grid.horizon, grid.n_paths,
                                     rngmod.derive_seed(cell_seed, "validation"))
            diag = {"dead_reg_units": len(model.reg_codebook.dead_units),
                    "dead_def_units": len(model.def_codebook.dead_units),
                    "empty_rows": int(np.sum(~model.transition.supported))}
            status = "ok"
        except Exception as exc:  # a failed cell is recorded, not fatal
            score, diag, status = math.inf, {}, f"failed: {exc}"
        if progress is not None:
            progress(f"cell n1={n1} n2={n2} sse={score:.6g} {status}")
        return a, b, n1, n2, score, diag, status

    surface = np.full((len(grid.n1_values), len(grid.n2_values)), math.inf)
    status = [["" for _ in grid.n2_values] for _ in grid.n1_values]
    diagnostics = {}
    if jobs <= 1:
        results = [run(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            results = list(pool.map(run, cells))
    for a, b, n1, n2, score, diag, st in results:
        surface[a, b] = score
        status[a][b] = st
        diagnostics[(n1, n2)] = diag
    result = SweepResult(grid, surface, status, diagnostics)
    result.best  # raises SweepError when no cell succeeded
    return result


def refit_best(learn: TimeSeries, valid: TimeSeries, spec: LagSpec, best: tuple,
               som_template: SomConfig, seed: int = 0,
               normalize_series: bool = False) -> DvqModel:
    """Refit the selected sizes on the learning and validation sets joined."""
    n1, n2 = best
    merged = learn.concat(valid, name=learn.name.split(":")[0])
    return fit(merged, spec, _cell_config(som_template, n1), _cell_config(som_template, n2),
               seed=rngmod.derive_seed(seed, n1, n2), normalize_series=normalize_series)


def stderr_progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)
