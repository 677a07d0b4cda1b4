"""Time-indexed multi-asset panels and elementary return transformations.

Everything here is a pure function over value-semantic inputs: panel arrays
are frozen (read-only) at construction, so panels can be shared freely
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Timestamp",
    "PricePanel",
    "ReturnPanel",
    "MarketSeries",
    "log_returns",
    "market_return",
]


@dataclass(frozen=True, order=True)
class Timestamp:
    """One bar on the sampling grid.

    ``epoch_seconds`` orders bars globally, ``session_id`` indexes the
    trading day and ``intraday_bin`` is the 0-based bar index within the
    session.
    """

    epoch_seconds: int
    session_id: int
    intraday_bin: int


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def _validated_grid(timestamps: Sequence[Timestamp]) -> tuple[Timestamp, ...]:
    grid = tuple(timestamps)
    for prev, cur in zip(grid, grid[1:]):
        if cur.epoch_seconds <= prev.epoch_seconds:
            raise ValueError(
                "timestamps must be strictly increasing: "
                f"{prev.epoch_seconds} then {cur.epoch_seconds}"
            )
        if cur.session_id < prev.session_id:
            raise ValueError("session_id must be non-decreasing along a panel")
        if cur.session_id != prev.session_id and cur.intraday_bin != 0:
            raise ValueError(
                f"intraday_bin must reset to 0 at the start of session {cur.session_id}"
            )
    return grid


@dataclass(frozen=True)
class PricePanel:
    """T x N panel of strictly positive prices on a common time grid."""

    timestamps: tuple[Timestamp, ...]
    symbols: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        grid = _validated_grid(self.timestamps)
        symbols = tuple(str(s) for s in self.symbols)
        prices = _frozen_array(self.prices)
        if prices.ndim != 2:
            raise ValueError("prices must be a T x N matrix")
        t, n = prices.shape
        if t < 2:
            raise ValueError("a price panel needs at least 2 bars")
        if n < 2:
            raise ValueError("a price panel needs at least 2 symbols")
        if len(grid) != t:
            raise ValueError(f"{len(grid)} timestamps for {t} price rows")
        if len(symbols) != n:
            raise ValueError(f"{len(symbols)} symbols for {n} price columns")
        bad = ~(np.isfinite(prices) & (prices > 0.0))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValueError(
                f"non-positive or non-finite price at row {r}, symbol {symbols[c]!r}: "
                f"{prices[r, c]!r}"
            )
        object.__setattr__(self, "timestamps", grid)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "prices", prices)

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape


@dataclass(frozen=True)
class ReturnPanel:
    """T x N panel of per-bar log returns."""

    timestamps: tuple[Timestamp, ...]
    symbols: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        grid = _validated_grid(self.timestamps)
        symbols = tuple(str(s) for s in self.symbols)
        returns = _frozen_array(self.returns)
        if returns.ndim != 2:
            raise ValueError("returns must be a T x N matrix")
        t, n = returns.shape
        if n < 1:
            raise ValueError("a return panel needs at least 1 symbol")
        if len(grid) != t:
            raise ValueError(f"{len(grid)} timestamps for {t} return rows")
        if len(symbols) != n:
            raise ValueError(f"{len(symbols)} symbols for {n} return columns")
        if not np.isfinite(returns).all():
            r, c = np.argwhere(~np.isfinite(returns))[0]
            raise ValueError(f"non-finite return at row {r}, symbol {symbols[c]!r}")
        object.__setattr__(self, "timestamps", grid)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "returns", returns)

    @property
    def shape(self) -> tuple[int, int]:
        return self.returns.shape


@dataclass(frozen=True)
class MarketSeries:
    """Cross-sectional mean return per bar."""

    timestamps: tuple[Timestamp, ...]
    values: np.ndarray

    def __post_init__(self):
        grid = _validated_grid(self.timestamps)
        values = _frozen_array(self.values)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if len(grid) != values.size:
            raise ValueError(f"{len(grid)} timestamps for {values.size} values")
        object.__setattr__(self, "timestamps", grid)
        object.__setattr__(self, "values", values)


def log_returns(prices: PricePanel, drop_overnight: bool = False) -> ReturnPanel:
    """Per-bar log returns of a price panel.

    Each return row is labelled with the timestamp of the bar it ends on.
    With ``drop_overnight`` set, rows whose two price observations straddle a
    session boundary are excluded.

    Parameters
    ----------
    prices : PricePanel
    drop_overnight : bool
        Exclude returns spanning a change of ``session_id``.

    Returns
    -------
    ReturnPanel
    """
    p = prices.prices
    bad = ~(np.isfinite(p) & (p > 0.0))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(
            f"non-positive price at row {r}, symbol {prices.symbols[c]!r}: {p[r, c]!r}"
        )
    rets = np.diff(np.log(p), axis=0)
    grid = prices.timestamps[1:]
    if drop_overnight:
        keep = np.array(
            [
                prices.timestamps[k].session_id == prices.timestamps[k + 1].session_id
                for k in range(len(grid))
            ]
        )
        rets = rets[keep]
        grid = tuple(ts for ts, ok in zip(grid, keep) if ok)
    return ReturnPanel(grid, prices.symbols, rets)


def market_return(panel: ReturnPanel) -> MarketSeries:
    """Equal-weighted cross-sectional mean return per bar."""
    if panel.returns.shape[0] == 0:
        raise ValueError("cannot average an empty return panel")
    return MarketSeries(panel.timestamps, panel.returns.mean(axis=1))
