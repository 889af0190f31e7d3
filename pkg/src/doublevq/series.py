"""Time-series container, lag structures and regressor/deformation construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class SeriesError(ValueError):
    """Raised for malformed series, lag specifications or splits."""


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    name: str = "series"
    sample_period: Optional[str] = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise SeriesError("a time series needs at least one value")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise SeriesError(f"non-finite value at position {int(bad[0])}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def slice(self, start: int, stop: int, name: Optional[str] = None) -> "TimeSeries":
        return TimeSeries(self.values[start:stop], name or self.name, self.sample_period)

    def concat(self, other: "TimeSeries", name: Optional[str] = None) -> "TimeSeries":
        return TimeSeries(np.concatenate([self.values, other.values]),
                          name or self.name, self.sample_period)


@dataclass(frozen=True)
class LagSpec:
    """Block size ``d`` and the past block offsets that make up a regressor.

    Offsets count d-blocks back from the most recent one, so ``LagSpec(1,
    (0, 1, 2, 3, 5, 6))`` reads x(t), x(t-1), x(t-2), x(t-3), x(t-5), x(t-6).
    """

    d: int = 1
    offsets: tuple = (0,)

    def __post_init__(self):
        offsets = tuple(int(o) for o in self.offsets)
        if int(self.d) < 1:
            raise SeriesError(f"block size d must be positive, got {self.d}")
        if not offsets:
            raise SeriesError("at least one offset is required")
        if offsets[0] != 0:
            raise SeriesError("offset 0 (the most recent block) must be present and first")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise SeriesError(f"offsets must be strictly increasing, got {list(offsets)}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def contiguous(cls, p: int, d: int = 1) -> "LagSpec":
        return cls(d, tuple(range(p)))

    @property
    def m(self) -> int:
        return len(self.offsets)

    @property
    def p(self) -> int:
        return self.m * self.d

    @property
    def window(self) -> int:
        """Number of consecutive raw values a regressor spans."""
        return self.d * (self.offsets[-1] + 1)

    def lag_back(self) -> np.ndarray:
        """Distance back from the newest value for each regressor component."""
        return np.array([o * self.d + j for o in self.offsets for j in range(self.d)],
                        dtype=np.int64)

    def to_dict(self) -> dict:
        return {"d": self.d, "offsets": list(self.offsets)}

    @classmethod
    def from_dict(cls, doc: dict) -> "LagSpec":
        return cls(int(doc["d"]), tuple(doc["offsets"]))


@dataclass(frozen=True)
class RegressorSet:
    times: np.ndarray     # 1-based time index of the newest value in each regressor
    vectors: np.ndarray   # (rows, p), most recent block first

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class DeformationSet:
    times: np.ndarray     # time index of the source regressor
    vectors: np.ndarray

    def __len__(self) -> int:
        return self.times.size


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=np.float64).reshape(-1)


def build_regressors(series, spec: LagSpec) -> RegressorSet:
    """All regressors whose past values exist, in chronological order.

    For ``d > 1`` the rows sit on a stride-``d`` grid anchored so that the
    final series value closes the newest block; any partial block at the
    start is dropped.
    """
    x = _values(series)
    n = x.size
    if n < spec.window:
        raise SeriesError(
            f"series of length {n} is too short for lag spec {spec.to_dict()}: "
            f"need at least {spec.window} values")
    first = spec.window + (n - spec.window) % spec.d   # 1-based
    times = np.arange(first, n + 1, spec.d, dtype=np.int64)
    idx = (times - 1)[:, None] - spec.lag_back()[None, :]
    return RegressorSet(times, x[idx])


def build_deformations(regs: RegressorSet, spec: LagSpec) -> DeformationSet:
    if len(regs) < 2:
        raise SeriesError("need at least two regressors to form a deformation")
    steps = np.diff(regs.times)
    if np.any(steps != spec.d):
        raise SeriesError("regressors are not on a stride-d grid")
    return DeformationSet(regs.times[:-1].copy(), regs.vectors[1:] - regs.vectors[:-1])


def min_length(spec: LagSpec, n_regressors: int = 1) -> int:
    return spec.window + (n_regressors - 1) * spec.d


def split_counts(series: TimeSeries, counts: Sequence[int], unit: int = 1):
    """Chronological split into consecutive segments of ``counts[i] * unit`` values.

    Segments start at the first observation; values past the last segment
    are left unused (10 000 points split 6000/2000/100 ignores the final 1900).
    """
    sizes = [int(c) * int(unit) for c in counts]
    if any(s <= 0 for s in sizes):
        raise SeriesError(f"split counts must be positive, got {list(counts)}")
    total = sum(sizes)
    n = len(series)
    if total > n:
        raise SeriesError(f"split needs {total} values but the series has {n}")
    start = 0
    parts = []
    names = ("learn", "valid", "test")
    for i, size in enumerate(sizes):
        suffix = names[i] if i < len(names) else f"part{i}"
        parts.append(series.slice(start, start + size, f"{series.name}:{suffix}"))
        start += size
    return tuple(parts)


def split_chronological(series: TimeSeries, learn_frac: float, valid_frac: float,
                        test_frac: float, min_segment: int = 1):
    fracs = (learn_frac, valid_frac, test_frac)
    if any(not f > 0 for f in fracs):
        raise SeriesError(f"split fractions must be positive, got {fracs}")
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise SeriesError(f"split fractions must sum to 1, got {sum(fracs)!r}")
    n = len(series)
    n_learn = int(round(n * learn_frac))
    n_valid = int(round(n * valid_frac))
    n_test = n - n_learn - n_valid
    for label, size in zip(("learning", "validation", "test"), (n_learn, n_valid, n_test)):
        if size < min_segment:
            raise SeriesError(f"{label} segment has {size} values, needs {min_segment}")
    return split_counts(series, (n_learn, n_valid, n_test))


@dataclass(frozen=True)
class NormParams:
    mean: float
    std: float
    mode: str = "zscore"

    def to_dict(self) -> dict:
        return {"mode": self.mode, "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormParams":
        return cls(float(doc["mean"]), float(doc["std"]), doc.get("mode", "zscore"))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


def normalize(series: TimeSeries, params: Optional[NormParams] = None):
    """Z-score a series; statistics come from ``series`` unless ``params`` is given."""
    if params is None:
        if len(series) < 2:
            raise SeriesError("normalization needs at least two values")
        mean = float(np.mean(series.values))
        std = float(np.std(series.values, ddof=1))
        if not std > 0:
            raise SeriesError("cannot z-score a series with zero variance")
        params = NormParams(mean, std)
    return TimeSeries(params.apply(series.values), series.name, series.sample_period), params


def denormalize(series: TimeSeries, params: NormParams) -> TimeSeries:
    return TimeSeries(params.invert(series.values), series.name, series.sample_period)


def autocorrelation(x, lag: int) -> float:
    """Pearson correlation between the series and itself shifted by ``lag``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not 0 < lag < x.size - 1:
        raise SeriesError(f"lag {lag} out of range for length {x.size}")
    return float(np.corrcoef(x[:-lag], x[lag:])[0, 1])


def parse_offsets(text: str) -> tuple:
    """Parse ``"0,1,2,3,5,6"`` or ranges like ``"0-3,5,6"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


__all__ = [
    "DeformationSet", "LagSpec", "NormParams", "RegressorSet", "SeriesError", "TimeSeries",
    "autocorrelation", "build_deformations", "build_regressors", "denormalize", "min_length",
    "normalize", "parse_offsets", "split_chronological", "split_counts",
]
