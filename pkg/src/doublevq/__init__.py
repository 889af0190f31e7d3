"""Long-term trend forecasting by double vector quantization.

Two Kohonen strings quantize the regressor space and the deformation space
of a time series; an empirical transition matrix links their clusters, and
Monte-Carlo walks through that structure give trend statistics (mean path,
variance, quantile bands) far beyond the horizon where point forecasts hold.
"""

__version__ = "0.1.0"

from ._kernels import get_backend, set_backend, use_backend
from .dvq import (DvqModel, ForecastEnsemble, TransitionMatrix, TrendSummary, fit, monte_carlo,
                  sample_deformation, simulate_path, summarize)
from .series import LagSpec, TimeSeries, build_deformations, build_regressors
from .som import Codebook, SomConfig

__all__ = [
    "Codebook", "DvqModel", "ForecastEnsemble", "LagSpec", "SomConfig", "TimeSeries",
    "TransitionMatrix", "TrendSummary", "build_deformations", "build_regressors", "fit",
    "get_backend", "monte_carlo", "sample_deformation", "set_backend", "simulate_path",
    "summarize", "use_backend",
]
