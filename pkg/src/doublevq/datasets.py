"""Synthetic benchmark series and single-column CSV files.

Generator defaults (frozen; changing one changes every golden value)::

    mackey_glass   beta=0.2 gamma=0.1 power=10 tau=17 dt=0.1 sample_every=3.0
                   burn_in=500 (time units) history0 ~ U(0.5, 1.3) per seed
    logistic       r=4, x0 ~ U(0.05, 0.95) per seed unless given
    sine_noise     period=20 noise=0.1
    synthetic_load base=1000 daily_amp=200 weekly_amp=0.3 trend=0.002/h
                   day_noise=25 day_ar=0.7 (AR(1) day-level shift) noise=5 (hourly)
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .io import atomic_write
from .series import TimeSeries

KINDS = ("mackey_glass", "logistic", "sine_noise", "synthetic_load")

DEFAULTS = {
    "mackey_glass": {"beta": 0.2, "gamma": 0.1, "power": 10.0, "tau": 17.0, "dt": 0.1,
                     "sample_every": 3.0, "burn_in": 500.0, "noise": 0.0},
    "logistic": {"r": 4.0, "x0": None},
    "sine_noise": {"period": 20.0, "noise": 0.1},
    "synthetic_load": {"base": 1000.0, "daily_amp": 200.0, "weekly_amp": 0.3,
                       "trend": 0.002, "day_noise": 25.0, "day_ar": 0.7, "noise": 5.0},
}


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown generator {self.kind!r}; choose from {KINDS}")
        if int(self.n) < 1:
            raise DataError(f"length must be >= 1, got {self.n}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise DataError(f"unknown parameters for {self.kind}: {sorted(unknown)}")

    def resolved(self) -> dict:
        out = dict(DEFAULTS[self.kind])
        out.update(self.params)
        return out


def _mackey_glass(n, rng, beta, gamma, power, tau, dt, sample_every, burn_in, noise):
    if not (dt > 0 and tau > 0 and sample_every > 0 and burn_in >= 0):
        raise DataError("mackey_glass needs dt, tau, sample_every > 0 and burn_in >= 0")
    substeps = int(round(sample_every / dt))
    lag_steps = int(round(tau / dt))
    if substeps < 1 or abs(substeps * dt - sample_every) > 1e-9 * sample_every:
        raise DataError("sample_every must be a whole multiple of dt")
    history = rng.uniform(0.5, 1.3, size=lag_steps + 1)
    skip = int(math.ceil(burn_in / sample_every))
    x = _kernels.mackey_glass(history, n + skip, substeps, dt, beta, gamma, power, lag_steps)
    x = x[skip:]
    if noise:
        x = x + noise * rng.standard_normal(n)
    return x


def _logistic(n, rng, r, x0):
    if not 0 < r <= 4:
        raise DataError("logistic map needs 0 < r <= 4")
    x = np.empty(n)
    x[0] = rng.uniform(0.05, 0.95) if x0 is None else float(x0)
    if not 0 <= x[0] <= 1:
        raise DataError("x0 must lie in [0, 1]")
    for t in range(1, n):
        x[t] = r * x[t - 1] * (1.0 - x[t - 1])
    return x


def _sine_noise(n, rng, period, noise):
    if not period > 0 or noise < 0:
        raise DataError("sine_noise needs period > 0 and noise >= 0")
    t = np.arange(n)
    x = np.sin(2 * np.pi * t / period)
    if noise:
        x = x + noise * rng.standard_normal(n)
    return x


def _synthetic_load(n, rng, base, daily_amp, weekly_amp, trend, day_noise, day_ar, noise):
    if noise < 0 or day_noise < 0 or not -1 < day_ar < 1:
        raise DataError("synthetic_load needs noise, day_noise >= 0 and |day_ar| < 1")
    t = np.arange(n, dtype=np.float64)
    daily = np.sin(2 * np.pi * (t - 6.0) / 24.0)
    weekly = 1.0 + weekly_amp * np.sin(2 * np.pi * t / 168.0)
    x = base + trend * t + daily_amp * daily * weekly
    n_days = (n + 23) // 24
    shocks = rng.standard_normal(n_days)
    level = np.empty(n_days)
    level[0] = shocks[0] * day_noise / np.sqrt(1.0 - day_ar ** 2)
    for k in range(1, n_days):
        level[k] = day_ar * level[k - 1] + day_noise * shocks[k]
    x = x + np.repeat(level, 24)[:n]
    if noise:
        x = x + noise * rng.standard_normal(n)
    return x


_GENERATORS = {"mackey_glass": _mackey_glass, "logistic": _logistic,
               "sine_noise": _sine_noise, "synthetic_load": _synthetic_load}

_PERIODS = {"mackey_glass": None, "logistic": None, "sine_noise": None, "synthetic_load": "1h"}


def generate(cfg: GeneratorConfig) -> TimeSeries:
    rng = np.random.default_rng(int(cfg.seed))
    values = _GENERATORS[cfg.kind](int(cfg.n), rng, **cfg.resolved())
    return TimeSeries(values, name=cfg.kind, sample_period=_PERIODS[cfg.kind])


def load_csv(path, name=None) -> TimeSeries:
    """Read one numeric value per line; a non-numeric first line is a header."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                if lineno == 1 and not values:
                    continue
                raise DataError(f"{path}: line {lineno}: not a number: {raw.strip()!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}: line {lineno}: non-finite value {raw.strip()!r}")
            values.append(value)
    if not values:
        raise DataError(f"{path}: no values found")
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return TimeSeries(np.array(values), name=name)


def series_csv(series: TimeSeries) -> str:
    return "".join(f"{float(v)!r}\n" for v in series.values)


def save_csv(series: TimeSeries, path) -> None:
    atomic_write(path, series_csv(series))
