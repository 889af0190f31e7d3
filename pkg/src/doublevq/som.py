"""One-dimensional Kohonen string trained in batch mode."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels


class SomError(ValueError):
    pass


@dataclass(frozen=True)
class SomConfig:
    k: int
    epochs: int = 50
    radius_start: Optional[float] = None   # None -> k / 4
    radius_end: float = 0.0
    kernel: str = "gaussian"
    init: str = "sample"
    seed: int = 0

    def __post_init__(self):
        if int(self.k) < 1:
            raise SomError(f"prototype count k must be >= 1, got {self.k}")
        if int(self.epochs) < 1:
            raise SomError(f"epochs must be >= 1, got {self.epochs}")
        if self.kernel != "gaussian":
            raise SomError(f"unsupported kernel {self.kernel!r}")
        if self.init not in ("sample", "pca_line"):
            raise SomError(f"unsupported init {self.init!r}")
        if not self.radius_end >= 0:
            raise SomError("radius_end must be non-negative")
        if self.start_radius < self.radius_end:
            raise SomError("radius_start must be >= radius_end")

    @property
    def start_radius(self) -> float:
        return self.k / 4.0 if self.radius_start is None else float(self.radius_start)

    def radii(self) -> np.ndarray:
        """Neighborhood radius used at each epoch (linear schedule)."""
        if self.epochs == 1:
            return np.array([float(self.radius_end)])
        return np.linspace(self.start_radius, float(self.radius_end), int(self.epochs))

    def with_k(self, k: int, seed: Optional[int] = None) -> "SomConfig":
        return replace(self, k=int(k), seed=self.seed if seed is None else int(seed))

    def to_dict(self) -> dict:
        return {"k": self.k, "epochs": self.epochs, "radius_start": self.start_radius,
                "radius_end": self.radius_end, "kernel": self.kernel, "init": self.init,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "SomConfig":
        return cls(int(doc["k"]), int(doc.get("epochs", 50)), doc.get("radius_start"),
                   float(doc.get("radius_end", 0.0)), doc.get("kernel", "gaussian"),
                   doc.get("init", "sample"), int(doc.get("seed", 0)))


@dataclass(frozen=True)
class Codebook:
    """Ordered prototypes; consecutive indices are string neighbors."""

    prototypes: np.ndarray
    config: Optional[SomConfig] = None
    occupancy: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        protos = np.array(self.prototypes, dtype=np.float64)
        if protos.ndim == 1:
            protos = protos[:, None]
        if protos.ndim != 2 or protos.shape[0] < 1:
            raise SomError("a codebook needs at least one prototype")
        if not np.all(np.isfinite(protos)):
            raise SomError("codebook prototypes must be finite")
        protos.setflags(write=False)
        object.__setattr__(self, "prototypes", protos)
        if self.occupancy is not None:
            object.__setattr__(self, "occupancy", np.asarray(self.occupancy, dtype=np.int64))

    @property
    def k(self) -> int:
        return self.prototypes.shape[0]

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]

    @property
    def dead_units(self) -> list:
        if self.occupancy is None:
            return []
        return [int(i) for i in np.flatnonzero(self.occupancy == 0)]

    def to_dict(self) -> dict:
        doc = {"k": self.k, "p": self.dim, "prototypes": self.prototypes.tolist()}
        doc["config"] = None if self.config is None else self.config.to_dict()
        doc["occupancy"] = None if self.occupancy is None else self.occupancy.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Codebook":
        protos = np.asarray(doc["prototypes"], dtype=np.float64)
        if protos.ndim != 2:
            raise SomError("field 'prototypes' must be a list of equal-length lists")
        if "k" in doc and int(doc["k"]) != protos.shape[0]:
            raise SomError(f"field 'k' says {doc['k']} but {protos.shape[0]} prototypes given")
        if "p" in doc and int(doc["p"]) != protos.shape[1]:
            raise SomError(f"field 'p' says {doc['p']} but prototypes have dim {protos.shape[1]}")
        cfg = doc.get("config")
        occ = doc.get("occupancy")
        return cls(protos, None if cfg is None else SomConfig.from_dict(cfg),
                   None if occ is None else np.asarray(occ, dtype=np.int64))


def _as_data(data, dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None] if dim in (None, 1) else arr[None, :]
    if arr.ndim != 2:
        raise SomError("data must be a 2-D array of vectors")
    if arr.shape[0] == 0:
        raise SomError("data is empty")
    if dim is not None and arr.shape[1] != dim:
        raise SomError(f"dimension mismatch: data has {arr.shape[1]}, codebook has {dim}")
    return np.ascontiguousarray(arr)


def neighborhood(k: int, radius: float) -> np.ndarray:
    """Gaussian weights over string distance; radius 0 gives the identity."""
    idx = np.arange(k)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    if radius <= 0:
        return (dist == 0).astype(np.float64)
    return np.exp(-dist ** 2 / (2.0 * radius ** 2))


def batch_step(prototypes: np.ndarray, data: np.ndarray, radius: float) -> np.ndarray:
    """One batch-SOM epoch: assign to BMUs, then kernel-weighted means.

    A prototype with zero kernel mass keeps its previous position.
    """
    prototypes = np.ascontiguousarray(prototypes, dtype=np.float64)
    k = prototypes.shape[0]
    labels = _kernels.bmu(prototypes, data)
    sums, counts = _kernels.cluster_sums(data, labels, k)
    weights = neighborhood(k, radius)
    mass = weights @ counts
    num = weights @ sums
    out = prototypes.copy()
    alive = mass > 0
    out[alive] = num[alive] / mass[alive, None]
    return out


def _initial_prototypes(data: np.ndarray, cfg: SomConfig) -> np.ndarray:
    n = data.shape[0]
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "sample":
        # draw among distinct rows so repeated vectors cannot seed twin units
        _, first = np.unique(data, axis=0, return_index=True)
        distinct = np.sort(first)
        if cfg.k <= distinct.size:
            pick = distinct[rng.choice(distinct.size, size=cfg.k, replace=False)]
        elif cfg.k <= n:
            pick = rng.choice(n, size=cfg.k, replace=False)
        else:
            pick = np.concatenate([rng.permutation(n), rng.choice(n, cfg.k - n, replace=True)])
        return data[np.sort(pick)].copy()
    # pca_line: prototypes evenly spaced along the leading principal axis
    mean = data.mean(axis=0)
    centered = data - mean
    if cfg.k == 1 or n == 1 or not np.any(centered):
        return np.repeat(mean[None, :], cfg.k, axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    proj = centered @ axis
    steps = np.linspace(proj.min(), proj.max(), cfg.k)
    return mean[None, :] + steps[:, None] * axis[None, :]


def train(data, cfg: SomConfig, init: Optional[np.ndarray] = None) -> Codebook:
    """Batch-train a Kohonen string on ``data``.

    ``init`` overrides the configured initialization with explicit starting
    prototypes (useful for refining an existing codebook).
    """
    data = _as_data(data)
    n, p = data.shape
    if cfg.k > n:
        warnings.warn(f"{cfg.k} prototypes for {n} data vectors: some units will be dead",
                      stacklevel=2)
    if init is None:
        protos = _initial_prototypes(data, cfg)
    else:
        protos = np.array(init, dtype=np.float64)
        if protos.shape != (cfg.k, p):
            raise SomError(f"init must have shape {(cfg.k, p)}, got {protos.shape}")
    for radius in cfg.radii():
        protos = batch_step(protos, data, float(radius))
    occupancy = np.bincount(_kernels.bmu(protos, data), minlength=cfg.k)
    return Codebook(protos, cfg, occupancy)


def bmu(cb: Codebook, v) -> int:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != cb.dim:
        raise SomError(f"dimension mismatch: vector has {v.size}, codebook has {cb.dim}")
    return int(_kernels.bmu(cb.prototypes, v[None, :])[0])


def assign_clusters(cb: Codebook, data) -> np.ndarray:
    return _kernels.bmu(cb.prototypes, _as_data(data, cb.dim))


def quantization_error(cb: Codebook, data) -> float:
    """Mean squared distance from each vector to its best-matching prototype."""
    data = _as_data(data, cb.dim)
    labels = _kernels.bmu(cb.prototypes, data)
    return float(np.mean(_kernels.sq_dist_to_bmu(cb.prototypes, data, labels)))
