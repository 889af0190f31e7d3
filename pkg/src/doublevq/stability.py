"""Numerical diagnostics for the long-run stability of simulated walks.

With g(x) = ||x||^2 the one-step drift from a regressor ``x`` in cluster ``i``
is ``E||x + Y||^2 - ||x||^2 = 2 x . E(Y|i) + E(||Y||^2 | i)``.  Ergodicity needs
that drift to turn negative far out in every unbounded cluster; the checks
here probe that premise along rays through boundary prototypes.  They are
warnings, not proofs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels, rng as rngmod
from .dvq import DvqModel, ForecastEnsemble, _history_buffer, _run

DEFAULT_SCALES = (2.0, 5.0, 10.0, 50.0)


class StabilityError(ValueError):
    pass


def drift(model: DvqModel, x, cluster: int) -> float:
    """Exact expected change of ||x||^2 after one draw from ``cluster``'s row.

    ``x`` is in model space (normalized units when the model normalizes).
    The empty-row fallback applies, as it does during simulation.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != model.spec.p:
        raise StabilityError(f"x has dimension {x.size}, model has p={model.spec.p}")
    if not 0 <= cluster < model.n1:
        raise StabilityError(f"cluster {cluster} out of range")
    src = model.transition.source_rows()[cluster]
    if model.transition.row_support[src] == 0:
        raise StabilityError(f"cluster {cluster} has no supported transition row")
    mean_y = model.expected_deformation()[cluster]
    mean_sq = model.expected_sq_norm()[cluster]
    return float(2.0 * x @ mean_y + mean_sq)


def sampled_drift(model: DvqModel, x, cluster: int, n: int, seed: int = 0):
    """Monte-Carlo estimate of the drift and its standard error."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    cdf = model.transition.cdf()[cluster]
    u = np.random.default_rng(seed).random(n)
    j = np.searchsorted(cdf, u, side="right")
    y = model.def_codebook.prototypes[j]
    vals = np.einsum("np,np->n", x + y, x + y) - x @ x
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))


def data_mean(model: DvqModel) -> np.ndarray:
    """Occupancy-weighted mean of the regressor prototypes (the training centroid)."""
    cb = model.reg_codebook
    weights = cb.occupancy if cb.occupancy is not None else np.ones(cb.k)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.sum() == 0:
        weights = np.ones(cb.k)
    return weights @ cb.prototypes / weights.sum()


def boundary_clusters(model: DvqModel) -> list:
    """String ends plus prototypes on the codebook's convex hull.

    The hull is exact for p <= 3 (scipy Qhull).  Above that, a prototype is
    flagged when no other prototype reaches further along the direction from
    the centroid to it, a sufficient condition for being a hull vertex.
    """
    protos = model.reg_codebook.prototypes
    k, p = protos.shape
    flagged = {0, k - 1}
    if k <= 2:
        return sorted(flagged)
    if p == 1:
        flagged.update({int(np.argmin(protos[:, 0])), int(np.argmax(protos[:, 0]))})
        return sorted(flagged)
    if p <= 3:
        if k <= p + 1:
            return list(range(k))
        from scipy.spatial import ConvexHull, QhullError
        try:
            flagged.update(int(v) for v in ConvexHull(protos).vertices)
            return sorted(flagged)
        except QhullError:
            pass    # degenerate (flat) codebook: use the ray test below
    center = data_mean(model)
    rel = protos - center
    norms = np.linalg.norm(rel, axis=1)
    for i in range(k):
        if norms[i] == 0:
            continue
        proj = rel @ (rel[i] / norms[i])
        if proj[i] >= proj.max() - 1e-12 * max(1.0, norms[i]):
            flagged.add(i)
    return sorted(flagged)


@dataclass
class ClusterDrift:
    cluster: int
    expected_deformation: list
    expected_sq_norm: float
    boundary: bool
    probes: list          # [{"scale", "probe_cluster", "drift"}]
    verdict: str          # PASS / WARN / "-" for interior clusters


@dataclass
class DriftReport:
    scales: list
    clusters: list
    heuristic: str = ("probes lie on the ray from the training centroid through each "
                      "boundary prototype; PASS means the drift is negative at the largest scale")

    @property
    def boundary(self) -> list:
        return [c for c in self.clusters if c.boundary]

    @property
    def all_pass(self) -> bool:
        return all(c.verdict == "PASS" for c in self.boundary)

    def to_dict(self) -> dict:
        return {"scales": self.scales, "heuristic": self.heuristic,
                "all_boundary_pass": self.all_pass,
                "clusters": [asdict(c) for c in self.clusters]}

    def table(self) -> str:
        lines = [f"{'cluster':>7}  {'boundary':>8}  {'E|Y|^2':>12}  "
                 + "  ".join(f"{'s=' + format(s, 'g'):>12}" for s in self.scales) + "  verdict"]
        for c in self.clusters:
            if not c.boundary:
                continue
            cells = "  ".join(f"{pr['drift']:>12.5g}" for pr in c.probes)
            lines.append(f"{c.cluster:>7}  {'yes':>8}  {c.expected_sq_norm:>12.5g}  {cells}  "
                         f"{c.verdict}")
        return "\n".join(lines)


def check_negative_drift_assumption(model: DvqModel,
                                    scale_factors: Sequence[float] = DEFAULT_SCALES) -> DriftReport:
    scales = sorted(float(s) for s in scale_factors)
    center = data_mean(model)
    mean_y = model.expected_deformation()
    mean_sq = model.expected_sq_norm()
    boundary = set(boundary_clusters(model))
    protos = model.reg_codebook.prototypes
    clusters = []
    for i in range(model.n1):
        probes = []
        verdict = "-"
        if i in boundary:
            for s in scales:
                x = center + s * (protos[i] - center)
                j = int(_kernels.bmu(protos, x[None, :])[0])
                probes.append({"scale": s, "probe_cluster": j, "drift": drift(model, x, j)})
            verdict = "PASS" if probes and probes[-1]["drift"] < 0 else "WARN"
        clusters.append(ClusterDrift(i, mean_y[i].tolist(), float(mean_sq[i]), i in boundary,
                                     probes, verdict))
    return DriftReport(scales, clusters)


def boundedness_check(ensemble, training, margin: float = 0.5) -> float:
    """Fraction of simulated values outside ``[min - margin*range, max + margin*range]``."""
    paths = ensemble.paths if isinstance(ensemble, ForecastEnsemble) else np.asarray(ensemble)
    train = training.values if hasattr(training, "values") else np.asarray(training)
    lo, hi = float(np.min(train)), float(np.max(train))
    width = hi - lo
    low, high = lo - margin * width, hi + margin * width
    if paths.size == 0:
        raise StabilityError("empty ensemble")
    outside = (paths < low) | (paths > high)
    return float(outside.mean())


@dataclass
class OccupancyStats:
    frequencies: list
    steps: int
    outside_fraction: float
    margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def stationary_occupancy(model: DvqModel, history, steps: int, seed: int,
                         training=None, margin: float = 0.5) -> OccupancyStats:
    """Visit frequencies of regressor clusters along one long walk."""
    if int(steps) < 1:
        raise StabilityError("steps must be >= 1")
    steps = int(steps)
    buf = _history_buffer(model, history)
    uniforms = rngmod.stream(seed, "occupancy").random((1, steps))
    clusters = np.empty((1, steps), dtype=np.int64)
    values = _run(model, buf, uniforms, record_clusters=clusters)
    freq = np.bincount(clusters[0], minlength=model.n1) / steps
    outside = 0.0
    if training is not None:
        outside = boundedness_check(values, training, margin)
    return OccupancyStats(freq.tolist(), steps, outside, margin)


def total_variation(a, b) -> float:
    a = np.asarray(a.frequencies if isinstance(a, OccupancyStats) else a, dtype=np.float64)
    b = np.asarray(b.frequencies if isinstance(b, OccupancyStats) else b, dtype=np.float64)
    return 0.5 * float(np.abs(a - b).sum())


def report_json(drift_report: DriftReport, occupancy: Optional[list] = None,
                boundedness: Optional[dict] = None) -> str:
    doc = {"drift": drift_report.to_dict()}
    if occupancy is not None:
        doc["occupancy"] = [o.to_dict() for o in occupancy]
        if len(occupancy) >= 2:
            doc["occupancy_tv_distance"] = total_variation(occupancy[0], occupancy[1])
    if boundedness is not None:
        doc["boundedness"] = boundedness
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
