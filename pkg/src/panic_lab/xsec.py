"""Per-bar cross-sectional statistics over a return panel.

The four row statistics (dispersion, excess kurtosis, sum of signs, and the
pairwise sign correlation) are the panic signatures used throughout the
package; the module also provides the trailing-window pairwise correlation
average and intraday seasonality profiling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ReturnPanel, Timestamp

__all__ = [
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
]


@dataclass(frozen=True)
class XsecSeries:
    """Per-bar cross-sectional statistics, one value per panel row.

    ``kurtosis`` entries are NaN where the row statistic is undefined
    (fewer than 4 names or zero dispersion).
    """

    timestamps: tuple[Timestamp, ...]
    dispersion: np.ndarray
    kurtosis: np.ndarray
    s_values: np.ndarray
    aic: np.ndarray
    market: np.ndarray


@dataclass(frozen=True)
class SeasonalProfile:
    """Mean of a statistic grouped by intraday bar index."""

    bin_index: np.ndarray
    mean_value: np.ndarray
    count: np.ndarray


def _row(values) -> np.ndarray:
    row = np.asarray(values, dtype=float)
    if row.ndim != 1:
        raise ValueError("expected a one-dimensional row of returns")
    return row


def dispersion(row) -> float:
    """Population standard deviation of one cross-sectional row."""
    r = _row(row)
    if r.size < 2:
        raise ValueError("dispersion needs at least 2 values")
    return float(np.sqrt(np.mean((r - r.mean()) ** 2)))


def xsec_kurtosis(row) -> float:
    """Excess kurtosis (Gaussian -> 0) of one cross-sectional row.

    Returns NaN when the row has zero dispersion.
    """
    r = _row(row)
    if r.size < 4:
        raise ValueError("cross-sectional kurtosis needs at least 4 values")
    dev = r - r.mean()
    m2 = np.mean(dev**2)
    if m2 == 0.0:
        return float("nan")
    m4 = np.mean(dev**4)
    return float(m4 / m2**2 - 3.0)


def sum_of_signs(row) -> float:
    """Cross-sectional mean of return signs, with sign(0) = 0."""
    r = _row(row)
    if r.size < 1:
        raise ValueError("sum_of_signs needs at least 1 value")
    return float(np.sign(r).sum() / r.size)


def aic_signs(row) -> float:
    """Average pairwise product of return signs over one row.

    Equals ``(N * S**2 - 1) / (N - 1)`` whenever no return is exactly zero,
    where S is :func:`sum_of_signs`.
    """
    r = _row(row)
    n = r.size
    if n < 2:
        raise ValueError("aic_signs needs at least 2 values")
    sg = np.sign(r)
    total = sg.sum()
    return float((total**2 - np.sum(sg**2)) / (n * (n - 1)))


def xsec_series(panel: ReturnPanel) -> XsecSeries:
    """All per-bar cross-sectional statistics of a panel in one pass."""
    r = panel.returns
    t, n = r.shape
    if n < 2:
        raise ValueError("cross-sectional statistics need at least 2 symbols")
    mean = r.mean(axis=1)
    dev = r - mean[:, None]
    m2 = np.mean(dev**2, axis=1)
    disp = np.sqrt(m2)
    if n >= 4:
        m4 = np.mean(dev**4, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            kurt = np.where(m2 > 0.0, m4 / m2**2 - 3.0, np.nan)
    else:
        kurt = np.full(t, np.nan)
    sg = np.sign(r)
    total = sg.sum(axis=1)
    s_vals = total / n
    aic = (total**2 - np.sum(sg**2, axis=1)) / (n * (n - 1))
    return XsecSeries(
        timestamps=panel.timestamps,
        dispersion=disp,
        kurtosis=kurt,
        s_values=s_vals,
        aic=aic,
        market=mean,
    )


def aic_old(panel: ReturnPanel, window: int = 50) -> np.ndarray:
    """Average pairwise product of trailing-window standardized returns.

    At each bar t the returns are centered and scaled by their own trailing
    mean and population standard deviation over the ``window`` bars ending at
    t, and the mean over all ordered pairs of the products is reported. The
    first ``window - 1`` entries, and any bar whose window contains a
    zero-variance stock, are NaN. Tracks market volatility much more closely
    than :func:`aic_signs` does.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    r = panel.returns
    t, n = r.shape
    if n < 2:
        raise ValueError("aic_old needs at least 2 symbols")
    if t <= window:
        raise ValueError(f"panel has {t} rows; needs more than window={window}")
    out = np.full(t, np.nan)
    wins = sliding_window_view(r, window, axis=0)  # (t - window + 1, n, window)
    mu = wins.mean(axis=-1)
    sig = np.sqrt(np.mean((wins - mu[..., None]) ** 2, axis=-1))
    cur = r[window - 1 :]
    ok = np.all(sig > 0.0, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(ok[:, None], (cur - mu) / np.where(sig > 0.0, sig, 1.0), 0.0)
    zsum = np.sum(z, axis=1)
    z2 = np.sum(z * z, axis=1)
    vals = (zsum**2 - z2) / (n * (n - 1))
    out[window - 1 :] = np.where(ok, vals, np.nan)
    return out


def seasonal_profile(values, timestamps: Sequence[Timestamp]) -> SeasonalProfile:
    """Mean of ``values`` grouped by intraday bar index; NaNs are skipped."""
    v = np.asarray(values, dtype=float)
    if len(timestamps) != v.size:
        raise ValueError("values and timestamps must have equal length")
    if v.size == 0:
        raise ValueError("cannot profile an empty series")
    bins = np.array([ts.intraday_bin for ts in timestamps])
    finite = np.isfinite(v)
    idx = np.unique(bins[finite])
    means = np.empty(idx.size)
    counts = np.empty(idx.size, dtype=int)
    for k, b in enumerate(idx):
        sel = finite & (bins == b)
        means[k] = v[sel].mean()
        counts[k] = int(sel.sum())
    return SeasonalProfile(bin_index=idx, mean_value=means, count=counts)


def deseasonalize(values, timestamps: Sequence[Timestamp], profile: SeasonalProfile) -> np.ndarray:
    """Divide each value by the profile mean of its intraday bin."""
    v = np.asarray(values, dtype=float)
    if len(timestamps) != v.size:
        raise ValueError("values and timestamps must have equal length")
    lookup = dict(zip(profile.bin_index.tolist(), profile.mean_value.tolist()))
    out = np.empty_like(v)
    for k, ts in enumerate(timestamps):
        try:
            m = lookup[ts.intraday_bin]
        except KeyError:
            raise ValueError(f"profile has no entry for intraday_bin {ts.intraday_bin}") from None
        if m == 0.0:
            raise ValueError(f"profile mean for intraday_bin {ts.intraday_bin} is zero")
        out[k] = v[k] / m
    return out
