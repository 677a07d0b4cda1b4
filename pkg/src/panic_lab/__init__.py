"""Volatility-feedback market simulation and cross-sectional panic statistics.

The package simulates panels of coupled stocks whose volatilities feed back
on their own past moves and whose cross-stock correlation jumps when market
volatility crosses a critical level, and provides the statistics used to
diagnose panic regimes in such panels: cross-sectional dispersion and
kurtosis, sign-correlation measures, correlation memory (variograms and
power-law fits), correlation leverage, and bimodality scoring.
"""

from .core import (
    MarketSeries,
    PricePanel,
    ReturnPanel,
    Timestamp,
    log_returns,
    market_return,
)
from .ingest import IngestOptions, ValidationReport, load_panel, load_returns, validate_panel
from .memstats import (
    BIMODALITY_THRESHOLD,
    BinnedCurve,
    FitResult,
    LagFunction,
    aic_vs_volatility,
    autocorrelation,
    bimodality_coefficient,
    fit_exponential,
    fit_power_law,
    histogram,
    leverage,
    variogram,
)
from .simengine import (
    ShockEvent,
    SimConfig,
    SimResult,
    correlated_noise,
    kernel_weights,
    simulate,
    step_correlation,
    update_volatility,
)
from .xsec import (
    SeasonalProfile,
    XsecSeries,
    aic_old,
    aic_signs,
    deseasonalize,
    dispersion,
    seasonal_profile,
    sum_of_signs,
    xsec_kurtosis,
    xsec_series,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Timestamp",
    "PricePanel",
    "ReturnPanel",
    "MarketSeries",
    "log_returns",
    "market_return",
    "SimConfig",
    "ShockEvent",
    "SimResult",
    "kernel_weights",
    "update_volatility",
    "step_correlation",
    "correlated_noise",
    "simulate",
    "XsecSeries",
    "SeasonalProfile",
    "dispersion",
    "xsec_kurtosis",
    "sum_of_signs",
    "aic_signs",
    "aic_old",
    "xsec_series",
    "seasonal_profile",
    "deseasonalize",
    "LagFunction",
    "FitResult",
    "BinnedCurve",
    "BIMODALITY_THRESHOLD",
    "variogram",
    "autocorrelation",
    "fit_power_law",
    "leverage",
    "fit_exponential",
    "aic_vs_volatility",
    "bimodality_coefficient",
    "histogram",
    "IngestOptions",
    "ValidationReport",
    "load_panel",
    "load_returns",
    "validate_panel",
]
