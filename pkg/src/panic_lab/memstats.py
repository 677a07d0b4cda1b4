"""Memory and asymmetry statistics for correlation time series.

Variogram and autocorrelation estimators with power-law exponent fits,
the lagged correlation-vs-return average with its exponential fit, the
correlation-vs-volatility binned curve, bimodality scoring and plain
histograms. All estimators skip missing (NaN) samples pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "LagFunction",
    "FitResult",
    "BinnedCurve",
    "variogram",
    "autocorrelation",
    "fit_power_law",
    "leverage",
    "fit_exponential",
    "aic_vs_volatility",
    "bimodality_coefficient",
    "histogram",
]

BIMODALITY_THRESHOLD = 5.0 / 9.0


@dataclass(frozen=True)
class LagFunction:
    """A statistic per positive lag, with the number of pairs averaged."""

    lags: np.ndarray
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=int)
        if lags.size and np.any(np.diff(lags) <= 0):
            raise ValueError("lags must be strictly increasing")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients plus log-space RMS residual and the lag range used."""

    params: dict[str, float]
    residual_rms: float
    lag_range: tuple[int, int]
    excluded_lags: tuple[int, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class BinnedCurve:
    """Mean of a statistic in uniform bins of standardized market volatility."""

    bin_centers: np.ndarray
    means: np.ndarray
    counts: np.ndarray


def _series(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    return arr


def variogram(series, max_lag: int) -> LagFunction:
    """Mean squared increment per lag, skipping NaN pairs.

    Parameters
    ----------
    series : array_like
        Time series; NaN entries mark missing samples.
    max_lag : int
        Largest lag; must satisfy ``1 <= max_lag < len(series)``.

    Returns
    -------
    LagFunction
        Lags with fewer than 2 valid pairs are omitted.
    """
    x = _series(series)
    if not 1 <= max_lag < x.size:
        raise ValueError(f"need series length > max_lag >= 1, got {x.size} and {max_lag}")
    lags, vals, counts = [], [], []
    for tau in range(1, max_lag + 1):
        a = x[:-tau]
        b = x[tau:]
        m = np.isfinite(a) & np.isfinite(b)
        n = int(m.sum())
        if n < 2:
            continue
        d = a[m] - b[m]
        lags.append(tau)
        vals.append(float(np.mean(d * d)))
        counts.append(n)
    return LagFunction(np.array(lags, dtype=int), np.array(vals), np.array(counts, dtype=int))


def autocorrelation(series, max_lag: int) -> LagFunction:
    """Sample autocorrelation per lag (lag 0 excluded), skipping NaN pairs.

    The series mean and variance are taken over all finite samples; for
    stationary input ``2 * var * (1 - acf)`` matches :func:`variogram` up to
    edge effects.
    """
    x = _series(series)
    if not 1 <= max_lag < x.size:
        raise ValueError(f"need series length > max_lag >= 1, got {x.size} and {max_lag}")
    finite = np.isfinite(x)
    if finite.sum() < 2:
        raise ValueError("need at least 2 finite samples")
    mean = x[finite].mean()
    var = float(np.mean((x[finite] - mean) ** 2))
    if var == 0.0:
        raise ValueError("series variance is zero")
    lags, vals, counts = [], [], []
    for tau in range(1, max_lag + 1):
        a = x[:-tau]
        b = x[tau:]
        m = np.isfinite(a) & np.isfinite(b)
        n = int(m.sum())
        if n < 2:
            continue
        cov = float(np.mean((a[m] - mean) * (b[m] - mean)))
        lags.append(tau)
        vals.append(cov / var)
        counts.append(n)
    return LagFunction(np.array(lags, dtype=int), np.array(vals), np.array(counts, dtype=int))


def fit_power_law(fn: LagFunction, lag_min: int = 1, lag_max: int = 100) -> FitResult:
    """Least-squares line through log(values) vs log(lags).

    ``params["gamma"]`` is the slope magnitude; the signed slope is reported
    alongside. All values in the fitted range must be positive.
    """
    sel = (fn.lags >= lag_min) & (fn.lags <= lag_max)
    lags = fn.lags[sel]
    vals = fn.values[sel]
    if lags.size < 3:
        raise ValueError(f"need at least 3 lags in [{lag_min}, {lag_max}], got {lags.size}")
    if np.any(vals <= 0.0):
        bad = lags[vals <= 0.0]
        raise ValueError(f"non-positive values in fit range at lags {bad.tolist()}")
    lx = np.log(lags.astype(float))
    ly = np.log(vals)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return FitResult(
        params={"gamma": float(abs(slope)), "slope": float(slope), "intercept": float(intercept)},
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        lag_range=(int(lags[0]), int(lags[-1])),
    )


def leverage(correlation_series, market_returns, max_lag: int, normalize: bool = False) -> LagFunction:
    """Mean of ``corr(t + tau) * r(t)`` per lag tau.

    Negative values mean that negative market returns precede elevated
    correlation. With ``normalize`` the returns are scaled to unit standard
    deviation first.
    """
    c = _series(correlation_series)
    r = _series(market_returns)
    if c.size != r.size:
        raise ValueError("series must have equal length")
    if not 1 <= max_lag < c.size:
        raise ValueError(f"need series length > max_lag >= 1, got {c.size} and {max_lag}")
    if normalize:
        finite = np.isfinite(r)
        sd = float(np.std(r[finite]))
        if sd == 0.0:
            raise ValueError("cannot normalize returns with zero standard deviation")
        r = r / sd
    lags, vals, counts = [], [], []
    for tau in range(1, max_lag + 1):
        a = c[tau:]
        b = r[:-tau]
        m = np.isfinite(a) & np.isfinite(b)
        n = int(m.sum())
        if n < 2:
            continue
        lags.append(tau)
        vals.append(float(np.mean(a[m] * b[m])))
        counts.append(n)
    return LagFunction(np.array(lags, dtype=int), np.array(vals), np.array(counts, dtype=int))


def fit_exponential(fn: LagFunction) -> FitResult:
    """Fit ``-A * exp(-tau / T)`` to a negative-valued lag function.

    Lags with values >= 0 are excluded from the fit and reported in
    ``excluded_lags``; at least 3 negative lags are required. A slope within
    1e-12 of zero is flagged by ``T = inf``.
    """
    neg = fn.values < 0.0
    excluded = tuple(int(l) for l in fn.lags[~neg])
    lags = fn.lags[neg].astype(float)
    vals = fn.values[neg]
    if lags.size < 3:
        raise ValueError(
            f"need at least 3 strictly negative values to fit, got {lags.size} "
            f"(excluded lags: {list(excluded)})"
        )
    ly = np.log(-vals)
    slope, intercept = np.polyfit(lags, ly, 1)
    t_scale = float("inf") if abs(slope) < 1e-12 else -1.0 / slope
    resid = ly - (slope * lags + intercept)
    return FitResult(
        params={
            "A": float(np.exp(intercept)),
            "T": float(t_scale),
            "slope": float(slope),
            "intercept": float(intercept),
        },
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        lag_range=(int(lags[0]), int(lags[-1])),
        excluded_lags=excluded,
    )


def aic_vs_volatility(aic, market_returns, bin_width_std: float = 0.25) -> BinnedCurve:
    """Mean correlation statistic in bins of standardized market volatility.

    Volatility is ``|r|`` divided by the sample standard deviation of ``|r|``;
    bins of width ``bin_width_std`` start at zero and empty bins are omitted.
    """
    a = _series(aic)
    r = _series(market_returns)
    if a.size != r.size:
        raise ValueError("series must have equal length")
    if bin_width_std <= 0.0:
        raise ValueError("bin_width_std must be positive")
    m = np.isfinite(a) & np.isfinite(r)
    absr = np.abs(r[m])
    sd = float(np.std(absr))
    if sd == 0.0:
        raise ValueError("standard deviation of |market returns| is zero")
    vol = absr / sd
    idx = np.floor(vol / bin_width_std).astype(int)
    present = np.unique(idx)
    centers = (present + 0.5) * bin_width_std
    means = np.array([a[m][idx == k].mean() for k in present])
    counts = np.array([int((idx == k).sum()) for k in present])
    return BinnedCurve(bin_centers=centers, means=means, counts=counts)


def bimodality_coefficient(samples) -> float:
    """Sarle's bimodality coefficient; values above 5/9 suggest bimodality.

    Computed as ``(skew**2 + 1) / (kurt + 3 * (n-1)**2 / ((n-2) * (n-3)))``
    with bias-corrected sample skewness and excess kurtosis, so it is
    invariant under affine transforms of the sample.
    """
    x = _series(samples)
    x = x[np.isfinite(x)]
    n = x.size
    if n < 4:
        raise ValueError("bimodality coefficient needs at least 4 samples")
    if np.all(x == x[0]):
        raise ValueError("bimodality coefficient undefined for a constant sample")
    skew = float(stats.skew(x, bias=False))
    kurt = float(stats.kurtosis(x, fisher=True, bias=False))
    correction = 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3))
    return (skew**2 + 1.0) / (kurt + correction)


def histogram(samples, n_bins: int, value_range: tuple[float, float] = (-1.0, 1.0)):
    """Uniform-width histogram; returns (bin_edges, counts).

    Counts cover the finite in-range samples only.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    lo, hi = value_range
    if not hi > lo:
        raise ValueError("value_range must be increasing")
    x = _series(samples)
    x = x[np.isfinite(x)]
    counts, edges = np.histogram(x, bins=n_bins, range=(lo, hi))
    return edges, counts
