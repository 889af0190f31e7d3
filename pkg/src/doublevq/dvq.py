"""Double vector quantization: characterization, simulation and trend statistics.

A fitted :class:`DvqModel` holds two Kohonen strings, one over regressors and
one over deformations (differences between consecutive regressors), and the
empirical conditional frequencies linking their clusters.  Forecasting walks
the regressor forward by drawing deformation prototypes from the row of the
current regressor's cluster; repeating the walk gives a Monte-Carlo ensemble
whose per-step statistics describe the long-term trend.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels, rng as rngmod, som
from .series import (LagSpec, NormParams, SeriesError, TimeSeries, build_deformations,
                     build_regressors, min_length, normalize)
from .som import Codebook, SomConfig

FORMAT_VERSION = 1


class FitError(ValueError):
    pass


class SimulationError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionMatrix:
    counts: np.ndarray
    fallback: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.size == 0:
            raise FitError("transition counts must be a non-empty 2-D array")
        if np.any(counts < 0):
            raise FitError("transition counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.fallback is not None:
            object.__setattr__(self, "fallback", np.asarray(self.fallback, dtype=np.int64))

    @property
    def shape(self):
        return self.counts.shape

    @property
    def row_support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def supported(self) -> np.ndarray:
        return self.row_support > 0

    @property
    def rows(self) -> np.ndarray:
        """Row-stochastic frequencies; unsupported rows are all zero."""
        support = self.row_support
        out = np.zeros(self.counts.shape)
        ok = support > 0
        out[ok] = self.counts[ok] / support[ok, None]
        return out

    def source_rows(self) -> np.ndarray:
        """Row actually used for each regressor cluster after the empty-row fallback."""
        if self.fallback is not None:
            return self.fallback
        return np.arange(self.counts.shape[0])

    def cdf(self) -> np.ndarray:
        """Cumulative rows, built from integer counts so each ends at exactly 1."""
        src = self.source_rows()
        counts = self.counts[src]
        support = counts.sum(axis=1)
        if np.any(support == 0):
            raise FitError("transition matrix has a row with no support and no fallback")
        return np.cumsum(counts, axis=1) / support[:, None]

    def resolved_rows(self) -> np.ndarray:
        return self.rows[self.source_rows()]


def nearest_supported(prototypes: np.ndarray, supported: np.ndarray) -> np.ndarray:
    """For each prototype, the index of the closest prototype whose row has support."""
    keep = np.flatnonzero(supported)
    if keep.size == 0:
        raise FitError("no regressor cluster has an associated deformation")
    labels = _kernels.bmu(np.ascontiguousarray(prototypes[keep]), np.ascontiguousarray(prototypes))
    out = keep[labels]
    out[keep] = keep
    return out


def estimate_transition(reg_labels, def_labels, n1: int, n2: int,
                        reg_prototypes: Optional[np.ndarray] = None) -> TransitionMatrix:
    reg_labels = np.asarray(reg_labels, dtype=np.int64)
    def_labels = np.asarray(def_labels, dtype=np.int64)
    if reg_labels.shape != def_labels.shape:
        raise FitError("regressor and deformation labels must be aligned one-to-one")
    if reg_labels.size == 0:
        raise FitError("no (regressor, deformation) pairs to count")
    counts = np.zeros((n1, n2), dtype=np.int64)
    np.add.at(counts, (reg_labels, def_labels), 1)
    fallback = None
    if reg_prototypes is not None:
        fallback = nearest_supported(np.asarray(reg_prototypes), counts.sum(axis=1) > 0)
    return TransitionMatrix(counts, fallback)


@dataclass(frozen=True)
class DvqModel:
    reg_codebook: Codebook
    def_codebook: Codebook
    transition: TransitionMatrix
    spec: LagSpec
    norm: Optional[NormParams] = None
    seed_of_fit: int = 0

    def __post_init__(self):
        p = self.spec.p
        if self.reg_codebook.dim != p or self.def_codebook.dim != p:
            raise FitError(f"codebook dimension must equal p={p}")
        if self.transition.shape != (self.reg_codebook.k, self.def_codebook.k):
            raise FitError("transition shape must be (n1, n2)")
        if self.transition.fallback is None:
            fb = nearest_supported(self.reg_codebook.prototypes, self.transition.supported)
            object.__setattr__(self, "transition", TransitionMatrix(self.transition.counts, fb))

    @property
    def n1(self) -> int:
        return self.reg_codebook.k

    @property
    def n2(self) -> int:
        return self.def_codebook.k

    def expected_deformation(self) -> np.ndarray:
        """E(Y | cluster i) for every regressor cluster (fallback rows applied)."""
        return self.transition.resolved_rows() @ self.def_codebook.prototypes

    def expected_sq_norm(self) -> np.ndarray:
        norms = np.einsum("jp,jp->j", self.def_codebook.prototypes, self.def_codebook.prototypes)
        return self.transition.resolved_rows() @ norms

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "norm": None if self.norm is None else self.norm.to_dict(),
            "reg_codebook": self.reg_codebook.to_dict(),
            "def_codebook": self.def_codebook.to_dict(),
            "transition": {"counts": self.transition.counts.tolist(),
                           "rows": self.transition.rows.tolist(),
                           "fallback": self.transition.source_rows().tolist()},
            "seed_of_fit": int(self.seed_of_fit),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "DvqModel":
        def need(obj, key, where):
            if not isinstance(obj, dict) or key not in obj:
                raise ModelFormatError(f"missing field '{where}{key}'")
            return obj[key]

        version = need(doc, "format_version", "")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"field 'format_version': unsupported value {version!r}")
        try:
            spec = LagSpec.from_dict(need(doc, "spec", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"field 'spec': {exc}") from exc
        books = {}
        for name in ("reg_codebook", "def_codebook"):
            try:
                books[name] = Codebook.from_dict(need(doc, name, ""))
            except (KeyError, TypeError, ValueError) as exc:
                raise ModelFormatError(f"field '{name}': {exc}") from exc
        trans = need(doc, "transition", "")
        try:
            counts = np.asarray(need(trans, "counts", "transition."), dtype=np.int64)
            fallback = trans.get("fallback")
            transition = TransitionMatrix(counts, fallback)
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(f"field 'transition.counts': {exc}") from exc
        if "rows" in trans:
            rows = np.asarray(trans["rows"], dtype=np.float64)
            if rows.shape != transition.shape or not np.allclose(rows, transition.rows,
                                                                 rtol=0, atol=1e-12):
                raise ModelFormatError("field 'transition.rows' disagrees with 'transition.counts'")
        norm = doc.get("norm")
        try:
            return cls(books["reg_codebook"], books["def_codebook"], transition, spec,
                       None if norm is None else NormParams.from_dict(norm),
                       int(doc.get("seed_of_fit", 0)))
        except FitError as exc:
            raise ModelFormatError(f"inconsistent model: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> "DvqModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def fit(series: TimeSeries, spec: LagSpec, cfg_x: SomConfig, cfg_y: SomConfig,
        seed: Optional[int] = None, normalize_series: bool = False) -> DvqModel:
    """Quantize regressors and deformations and count their co-occurrences.

    When ``seed`` is given, both SOM seeds are derived from it and override
    the seeds inside ``cfg_x`` / ``cfg_y``.
    """
    if len(series) < min_length(spec, 2):
        raise SeriesError(
            f"series of length {len(series)} is too short to fit lag spec "
            f"{spec.to_dict()}: need at least {min_length(spec, 2)} values")
    norm = None
    if normalize_series:
        series, norm = normalize(series)
    if seed is not None:
        cfg_x = cfg_x.with_k(cfg_x.k, rngmod.derive_seed(seed, "fit", "x"))
        cfg_y = cfg_y.with_k(cfg_y.k, rngmod.derive_seed(seed, "fit", "y"))
    regs = build_regressors(series, spec)
    defs = build_deformations(regs, spec)
    reg_cb = som.train(regs.vectors, cfg_x)
    def_cb = som.train(defs.vectors, cfg_y)
    reg_labels = som.assign_clusters(reg_cb, regs.vectors[:-1])
    def_labels = som.assign_clusters(def_cb, defs.vectors)
    transition = estimate_transition(reg_labels, def_labels, reg_cb.k, def_cb.k,
                                     reg_cb.prototypes)
    return DvqModel(reg_cb, def_cb, transition, spec, norm,
                    cfg_x.seed if seed is None else int(seed))


def inverse_cdf(cdf_row: np.ndarray, u: float) -> int:
    """Smallest index whose cumulative probability exceeds ``u``."""
    idx = int(np.searchsorted(cdf_row, u, side="right"))
    return min(idx, len(cdf_row) - 1)


def sample_deformation(model: DvqModel, cluster: int, rng) -> int:
    if not 0 <= int(cluster) < model.n1:
        raise IndexError(f"cluster {cluster} out of range for n1={model.n1}")
    u = rng.random() if hasattr(rng, "random") else float(rng)
    return inverse_cdf(model.transition.cdf()[int(cluster)], u)


def _history_buffer(model: DvqModel, history) -> np.ndarray:
    values = history.values if isinstance(history, TimeSeries) else np.asarray(history, float)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    need = model.spec.window
    if values.size < need:
        raise SeriesError(f"history of length {values.size} is too short: the lag spec "
                          f"needs the last {need} values")
    buf = values[-need:]
    if model.norm is not None:
        buf = model.norm.apply(buf)
    return buf


def _run(model: DvqModel, buf: np.ndarray, uniforms: np.ndarray,
         record_regs=None, record_clusters=None) -> np.ndarray:
    out, status = _kernels.simulate(model.reg_codebook.prototypes, model.def_codebook.prototypes,
                                    model.transition.cdf(), buf, model.spec.lag_back(),
                                    model.spec.d, uniforms, record_regs, record_clusters)
    failed = np.flatnonzero(status >= 0)
    if failed.size:
        path = int(failed[0])
        raise SimulationError(f"non-finite value at step {int(status[path]) + 1} of path {path}")
    if model.norm is not None:
        out = model.norm.invert(out)
    return out


def simulate_path(model: DvqModel, history, horizon: int, rng, trace: bool = False):
    """One stochastic path of ``horizon`` steps (``horizon * d`` values).

    ``rng`` is a numpy Generator or an integer seed.  With ``trace=True`` the
    regressors the walk used at each step are returned too (model space).
    """
    if int(horizon) < 1:
        raise ValueError("horizon must be >= 1")
    if not hasattr(rng, "random"):
        rng = np.random.default_rng(rng)
    buf = _history_buffer(model, history)
    uniforms = rng.random((1, int(horizon)))
    record = np.empty((1, int(horizon), model.spec.p)) if trace else None
    out = _run(model, buf, uniforms, record)[0]
    return (out, record[0]) if trace else out


@dataclass(frozen=True)
class ForecastEnsemble:
    paths: np.ndarray        # (N, h * d), chronological
    master_seed: int
    origin: np.ndarray       # regressor the walks started from (raw values)
    d: int = 1

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def horizon(self) -> int:
        return self.paths.shape[1] // self.d

    @property
    def seeds(self) -> list:
        """Per-path stream identities: ``SeedSequence(master_seed, spawn_key=(i,))``."""
        return [(self.master_seed, i) for i in range(self.n_paths)]


def monte_carlo(model: DvqModel, history, horizon: int, n_paths: int, master_seed: int,
                jobs: int = 1) -> ForecastEnsemble:
    """``n_paths`` independent walks; path ``i`` draws from stream ``(master_seed, i)``."""
    if int(n_paths) < 1:
        raise ValueError("n_paths must be >= 1")
    if int(horizon) < 1:
        raise ValueError("horizon must be >= 1")
    buf = _history_buffer(model, history)
    n_paths, horizon = int(n_paths), int(horizon)
    jobs = max(1, min(int(jobs), n_paths))
    bounds = np.linspace(0, n_paths, jobs + 1).astype(int)

    def chunk(i):
        lo, hi = bounds[i], bounds[i + 1]
        return _run(model, buf, rngmod.path_uniforms(master_seed, hi - lo, horizon, lo))

    if jobs == 1:
        paths = chunk(0)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            paths = np.vstack(list(pool.map(chunk, range(jobs))))
    origin = buf[model.spec.window - 1 - model.spec.lag_back()]
    if model.norm is not None:
        origin = model.norm.invert(origin)
    return ForecastEnsemble(paths, int(master_seed), origin, model.spec.d)


@dataclass(frozen=True)
class TrendSummary:
    mean: np.ndarray
    variance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    levels: tuple = (0.025, 0.975)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=np.float64)
        return (truth >= self.lower[:truth.size]) & (truth <= self.upper[:truth.size])


def summarize(ens, levels: Sequence[float] = (0.025, 0.975)) -> TrendSummary:
    """Per-step mean, unbiased variance and linear-interpolation quantiles."""
    paths = ens.paths if isinstance(ens, ForecastEnsemble) else np.asarray(ens, dtype=np.float64)
    if paths.ndim != 2 or paths.shape[0] == 0 or paths.shape[1] == 0:
        raise ValueError("cannot summarize an empty ensemble")
    lo, hi = (float(v) for v in levels)
    if not (0 < lo < 1 and 0 < hi < 1 and lo <= hi):
        raise ValueError(f"quantile levels must satisfy 0 < lower <= upper < 1, got {levels}")
    mean = paths.mean(axis=0)
    if paths.shape[0] >= 2:
        variance = paths.var(axis=0, ddof=1)
    else:
        variance = np.full(paths.shape[1], math.nan)
    lower, upper = np.quantile(paths, [lo, hi], axis=0, method="linear")
    return TrendSummary(mean, variance, lower, upper, (lo, hi))


# -- file exports -----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def ensemble_csv(ens: ForecastEnsemble) -> str:
    cols = ens.paths.shape[1]
    lines = [",".join(f"v{i + 1}" for i in range(cols))]
    lines.extend(",".join(_fmt(v) for v in row) for row in ens.paths)
    return "\n".join(lines) + "\n"


def summary_csv(summary: TrendSummary) -> str:
    lines = ["step,mean,variance,lower,upper"]
    for i in range(summary.mean.size):
        lines.append(",".join([str(i + 1), _fmt(summary.mean[i]), _fmt(summary.variance[i]),
                               _fmt(summary.lower[i]), _fmt(summary.upper[i])]))
    return "\n".join(lines) + "\n"
