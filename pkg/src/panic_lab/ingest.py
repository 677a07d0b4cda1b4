"""CSV panel loading and validation.

Wide CSVs carry one timestamp column plus one column per symbol; long CSVs
carry (timestamp, symbol, price) rows and are pivoted. Timestamps are
ISO-8601 local exchange time; sessions are assigned by calendar date and
intraday bins by position within the date. Empty fields are missing values:
symbols with insufficient coverage are dropped with a warning, short gaps
are forward-filled, longer gaps are an error.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import PricePanel, ReturnPanel, Timestamp

__all__ = ["IngestOptions", "ValidationReport", "load_panel", "load_returns", "validate_panel"]

log = logging.getLogger(__name__)

EXTREME_LOG_RETURN = 0.5


@dataclass(frozen=True)
class IngestOptions:
    """Loader behaviour knobs.

    ``min_coverage`` is the fraction of non-missing cells a symbol must have
    to be kept; ``forward_fill_limit`` bounds how many consecutive missing
    bars may be patched with the prior price. ``drop_overnight`` is carried
    for the downstream return construction and does not affect loading.
    """

    format: str = "wide"
    timestamp_format: str = "%Y-%m-%dT%H:%M:%S"
    drop_overnight: bool = False
    min_coverage: float = 0.9
    forward_fill_limit: int = 2

    def __post_init__(self):
        if self.format not in ("wide", "long"):
            raise ValueError(f"format must be 'wide' or 'long', got {self.format!r}")
        if not 0.0 < self.min_coverage <= 1.0:
            raise ValueError("min_coverage must lie in (0, 1]")
        if self.forward_fill_limit < 0:
            raise ValueError("forward_fill_limit must be >= 0")


@dataclass(frozen=True)
class ValidationReport:
    """Report-only health summary of a price panel."""

    coverage: dict[str, float]
    session_count: int
    session_bar_histogram: dict[int, int]
    extreme_cells: tuple[tuple[int, str, float], ...]
    issues: tuple[str, ...]


def _parse_stamp(text: str, fmt: str, line_no: int) -> datetime:
    try:
        return datetime.strptime(text, fmt)
    except ValueError:
        raise ValueError(f"line {line_no}: cannot parse timestamp {text!r} with {fmt!r}") from None


def _grid_from_datetimes(stamps: list[datetime]) -> tuple[Timestamp, ...]:
    sessions: dict = {}
    grid = []
    prev_epoch = None
    bin_in_session = 0
    for dt in stamps:
        epoch = int(dt.replace(tzinfo=timezone.utc).timestamp())
        if prev_epoch is not None and epoch <= prev_epoch:
            raise ValueError(f"timestamps not strictly increasing at {dt.isoformat()}")
        day = dt.date()
        if day not in sessions:
            sessions[day] = len(sessions)
            bin_in_session = 0
        else:
            bin_in_session += 1
        grid.append(Timestamp(epoch, sessions[day], bin_in_session))
        prev_epoch = epoch
    return tuple(grid)


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [row for row in csv.reader(fh)]


def _cells_wide(rows: list[list[str]], fmt: str):
    header = rows[0]
    if len(header) < 2 or header[0].strip().lower() != "timestamp":
        raise ValueError("wide CSV must start with a 'timestamp' column plus symbol columns")
    symbols = [h.strip() for h in header[1:]]
    if len(set(symbols)) != len(symbols):
        raise ValueError("duplicate symbol columns in header")
    stamps: list[datetime] = []
    values = np.full((len(rows) - 1, len(symbols)), np.nan)
    for i, row in enumerate(rows[1:]):
        line_no = i + 2
        if len(row) != len(header):
            raise ValueError(f"line {line_no}: expected {len(header)} fields, got {len(row)}")
        stamps.append(_parse_stamp(row[0].strip(), fmt, line_no))
        for j, field in enumerate(row[1:]):
            field = field.strip()
            if field == "":
                continue
            try:
                values[i, j] = float(field)
            except ValueError:
                raise ValueError(f"line {line_no}: bad price {field!r} for {symbols[j]!r}") from None
    return stamps, symbols, values


def _cells_long(rows: list[list[str]], fmt: str):
    header = [h.strip().lower() for h in rows[0]]
    if header != ["timestamp", "symbol", "price"]:
        raise ValueError("long CSV must have header 'timestamp,symbol,price'")
    stamps: list[datetime] = []
    stamp_index: dict[str, int] = {}
    symbols: list[str] = []
    symbol_index: dict[str, int] = {}
    triples: list[tuple[int, int, float, int]] = []
    for i, row in enumerate(rows[1:]):
        line_no = i + 2
        if len(row) != 3:
            raise ValueError(f"line {line_no}: expected 3 fields, got {len(row)}")
        raw_ts, sym, field = (f.strip() for f in row)
        dt = _parse_stamp(raw_ts, fmt, line_no)
        if raw_ts not in stamp_index:
            stamp_index[raw_ts] = len(stamps)
            stamps.append(dt)
        if sym not in symbol_index:
            symbol_index[sym] = len(symbols)
            symbols.append(sym)
        if field == "":
            continue
        try:
            price = float(field)
        except ValueError:
            raise ValueError(f"line {line_no}: bad price {field!r} for {sym!r}") from None
        triples.append((stamp_index[raw_ts], symbol_index[sym], price, line_no))
    values = np.full((len(stamps), len(symbols)), np.nan)
    for ti, si, price, line_no in triples:
        if np.isfinite(values[ti, si]):
            raise ValueError(f"line {line_no}: duplicate observation for {symbols[si]!r}")
        values[ti, si] = price
    return stamps, symbols, values


def _forward_fill(col: np.ndarray, sym: str, limit: int) -> int:
    """Fill gaps of at most ``limit`` bars in place; return the fill count."""
    missing = ~np.isfinite(col)
    if not missing.any():
        return 0
    filled = 0
    i = 0
    t = col.size
    while i < t:
        if not missing[i]:
            i += 1
            continue
        j = i
        while j < t and missing[j]:
            j += 1
        gap = j - i
        if i == 0:
            raise ValueError(f"symbol {sym!r} has no price before bar {gap - 1}; cannot forward-fill")
        if gap > limit:
            raise ValueError(
                f"symbol {sym!r} has a gap of {gap} bars at row {i}, "
                f"exceeding forward_fill_limit={limit}"
            )
        col[i:j] = col[i - 1]
        filled += gap
        i = j
    return filled


def load_panel(path, options: IngestOptions | None = None) -> PricePanel:
    """Load a price panel from CSV, validating and patching per ``options``.

    Raises ValueError with the offending line for malformed rows, bad or
    unordered timestamps, non-positive prices and over-long gaps.
    """
    options = options or IngestOptions()
    path = Path(path)
    rows = _read_rows(path)
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    if options.format == "wide":
        stamps, symbols, values = _cells_wide(rows, options.timestamp_format)
    else:
        stamps, symbols, values = _cells_long(rows, options.timestamp_format)

    grid = _grid_from_datetimes(stamps)

    coverage = np.isfinite(values).mean(axis=0)
    keep = coverage >= options.min_coverage
    for sym, cov, ok in zip(symbols, coverage, keep):
        if not ok:
            log.warning("dropping symbol %r: coverage %.1f%% below min_coverage %.1f%%",
                        sym, 100 * cov, 100 * options.min_coverage)
    if int(keep.sum()) < 2:
        raise ValueError("fewer than 2 symbols meet min_coverage; cannot build a panel")
    symbols = [s for s, ok in zip(symbols, keep) if ok]
    values = values[:, keep]

    fills = {}
    for j, sym in enumerate(symbols):
        col = values[:, j]
        n_filled = _forward_fill(col, sym, options.forward_fill_limit)
        values[:, j] = col
        if n_filled:
            fills[sym] = n_filled
    if fills:
        log.info("forward-filled cells: %s", fills)

    bad = ~(np.isfinite(values) & (values > 0.0))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(
            f"non-positive price at data row {r + 1} (line {r + 2}), symbol {symbols[c]!r}"
        )
    return PricePanel(grid, tuple(symbols), values)


def load_returns(path, timestamp_format: str = "%Y-%m-%dT%H:%M:%S") -> ReturnPanel:
    """Load a wide CSV of already-computed returns (all cells required)."""
    path = Path(path)
    rows = _read_rows(path)
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    stamps, symbols, values = _cells_wide(rows, timestamp_format)
    if not np.isfinite(values).all():
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"missing or non-finite return at line {r + 2}, symbol {symbols[c]!r}")
    grid = _grid_from_datetimes(stamps)
    return ReturnPanel(grid, tuple(symbols), values)


def validate_panel(panel: PricePanel) -> ValidationReport:
    """Health report: coverage, session structure and extreme log returns."""
    t, n = panel.prices.shape
    coverage = {sym: float(np.isfinite(panel.prices[:, j]).mean()) for j, sym in enumerate(panel.symbols)}
    session_ids = [ts.session_id for ts in panel.timestamps]
    bars_per_session: dict[int, int] = {}
    for sid in session_ids:
        bars_per_session[sid] = bars_per_session.get(sid, 0) + 1
    histogram: dict[int, int] = {}
    for bars in bars_per_session.values():
        histogram[bars] = histogram.get(bars, 0) + 1

    rets = np.diff(np.log(panel.prices), axis=0)
    extreme = []
    issues = []
    for r, c in np.argwhere(np.abs(rets) > EXTREME_LOG_RETURN):
        cell = (int(r + 1), panel.symbols[c], float(rets[r, c]))
        extreme.append(cell)
        issues.append(
            f"extreme log return {cell[2]:+.3f} at row {cell[0]}, symbol {cell[1]!r}"
        )
    return ValidationReport(
        coverage=coverage,
        session_count=len(bars_per_session),
        session_bar_histogram=histogram,
        extreme_cells=tuple(extreme),
        issues=tuple(issues),
    )
