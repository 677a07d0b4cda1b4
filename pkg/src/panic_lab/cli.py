"""Command-line front end.

``panic-lab simulate`` runs the engine from a JSON config; ``analyze`` turns
a panel into per-bar cross-sectional statistics; ``variogram``, ``leverage``
and ``aicvol`` compute memory/asymmetry curves from an analysis output; and
``report`` summarizes named windows. Every command writes a manifest and
deterministic, 17-significant-digit CSVs; re-running with the same resolved
config reproduces the data files byte for byte. Exit codes: 0 success,
2 input/config error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import ReturnPanel, Timestamp, log_returns
from .ingest import IngestOptions, load_panel, load_returns
from .memstats import (
    aic_vs_volatility,
    autocorrelation,
    bimodality_coefficient,
    fit_exponential,
    fit_power_law,
    histogram,
    leverage,
    variogram,
)
from .simengine import ShockEvent, SimConfig, simulate
from .xsec import deseasonalize, seasonal_profile, xsec_series

log = logging.getLogger("panic_lab")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3


class CliInputError(Exception):
    """Bad user input: config schema violation, bad flag value, bad file."""


@dataclasses.dataclass
class RunManifest:
    """Reproducibility record written once per run as manifest.json."""

    command: str
    config_digest: str
    seed: int | None
    tool_version: str
    output_files: list[str]
    started: str
    finished: str


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_missing(x: float) -> str:
    return "" if not np.isfinite(x) else _fmt(x)


def _iso(ts: Timestamp) -> str:
    return datetime.fromtimestamp(ts.epoch_seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%S")


def _ensure_out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _digest(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_manifest(out_dir: Path, command: str, resolved: dict, seed: int | None,
                    outputs: list[Path], started: str) -> None:
    manifest = RunManifest(
        command=command,
        config_digest=_digest(resolved),
        seed=seed,
        tool_version=__version__,
        output_files=[p.name for p in outputs],
        started=started,
        finished=_now(),
    )
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_wide_csv(path: Path, grid, symbols, values: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp," + ",".join(symbols) + "\n")
        for ts, row in zip(grid, values):
            fh.write(_iso(ts) + "," + ",".join(_fmt(v) for v in row) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("PANIC_LAB_THREADS")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliInputError(f"PANIC_LAB_THREADS must be an integer, got {env!r}") from None
    return 0


# ---------------------------------------------------------------------------
# simulate config schema
# ---------------------------------------------------------------------------

_SIM_FIELDS = {f.name: f.type for f in dataclasses.fields(SimConfig)}
_SHOCK_COMMON = {"kind", "start"}
_SHOCK_KEYS = {
    "exogenous": _SHOCK_COMMON | {"duration", "sigma_shock"},
    "endogenous": _SHOCK_COMMON | {"stock_index", "magnitude_std"},
}


def _load_sim_config(path: str) -> tuple[SimConfig, list[ShockEvent]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise CliInputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliInputError(f"config is not valid JSON: {exc}") from None

    if not isinstance(raw, dict):
        raise CliInputError("config root must be a JSON object")
    for key in raw:
        if key not in ("sim", "shocks"):
            raise CliInputError(f"unknown config key: {key}")

    sim_section = raw.get("sim", {})
    if not isinstance(sim_section, dict):
        raise CliInputError("'sim' must be a JSON object")
    for key in sim_section:
        if key not in _SIM_FIELDS:
            raise CliInputError(f"unknown config key: sim.{key}")
    try:
        config = SimConfig(**sim_section)
    except (TypeError, ValueError) as exc:
        raise CliInputError(f"sim: {exc}") from None

    shock_section = raw.get("shocks", [])
    if not isinstance(shock_section, list):
        raise CliInputError("'shocks' must be a JSON array")
    shocks = []
    for i, entry in enumerate(shock_section):
        if not isinstance(entry, dict):
            raise CliInputError(f"shocks[{i}] must be a JSON object")
        kind = entry.get("kind")
        if kind not in _SHOCK_KEYS:
            raise CliInputError(f"shocks[{i}].kind must be 'exogenous' or 'endogenous'")
        for key in entry:
            if key not in _SHOCK_KEYS[kind]:
                raise CliInputError(f"unknown config key: shocks[{i}].{key}")
        try:
            shocks.append(ShockEvent(**entry))
        except (TypeError, ValueError) as exc:
            raise CliInputError(f"shocks[{i}]: {exc}") from None
    return config, shocks


# ---------------------------------------------------------------------------
# xsec.csv I/O shared by the analysis commands
# ---------------------------------------------------------------------------

XSEC_COLUMNS = ("dispersion", "kurtosis", "s", "aic", "market")


def _read_xsec(path: str) -> dict[str, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise CliInputError(f"file not found: {path}") from None
    if not lines:
        raise CliInputError(f"{path} is empty")
    header = lines[0].split(",")
    expected = ["timestamp", *XSEC_COLUMNS]
    if header != expected:
        raise CliInputError(f"{path} must have columns {','.join(expected)}")
    cols: dict[str, list] = {name: [] for name in XSEC_COLUMNS}
    stamps = []
    for no, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(expected):
            raise CliInputError(f"{path} line {no}: expected {len(expected)} fields")
        stamps.append(fields[0])
        for name, field in zip(XSEC_COLUMNS, fields[1:]):
            try:
                cols[name].append(float(field) if field != "" else float("nan"))
            except ValueError:
                raise CliInputError(f"{path} line {no}: bad value {field!r}") from None
    out = {name: np.array(vals) for name, vals in cols.items()}
    out["timestamp"] = np.array(stamps)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    started = _now()
    config, shocks = _load_sim_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    threads = _resolve_threads(args.threads)
    out_dir = _ensure_out_dir(args.out)

    result = simulate(config, shocks)

    returns_path = out_dir / "returns.csv"
    panel = result.returns
    _write_wide_csv(returns_path, panel.timestamps, panel.symbols, panel.returns)

    state_path = out_dir / "state.csv"
    with open(state_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,s,sigma_m,sigma_c,clamped_count\n")
        for t in range(config.n_steps):
            fh.write(
                f"{t},{_fmt(result.s_path[t])},{_fmt(result.sigma_m_path[t])},"
                f"{_fmt(result.sigma_c_path[t])},{int(result.clamp_counts[t])}\n"
            )

    resolved = {
        "command": "simulate",
        "sim": dataclasses.asdict(config),
        "shocks": [dataclasses.asdict(ev) for ev in shocks],
        "threads": threads,
    }
    _write_manifest(out_dir, "simulate", resolved, config.seed, [returns_path, state_path], started)
    return EXIT_OK


def _load_panel_for_analysis(args) -> ReturnPanel:
    if not Path(args.panel).exists():
        raise CliInputError(f"panel file not found: {args.panel}")
    if args.input_type == "prices":
        options = IngestOptions(
            format=args.format,
            drop_overnight=args.drop_overnight,
            min_coverage=args.min_coverage,
            forward_fill_limit=args.ffill_limit,
        )
        prices = load_panel(args.panel, options)
        return log_returns(prices, drop_overnight=args.drop_overnight)
    return load_returns(args.panel)


def cmd_analyze(args) -> int:
    started = _now()
    threads = _resolve_threads(args.threads)
    panel = _load_panel_for_analysis(args)
    out_dir = _ensure_out_dir(args.out)
    series = xsec_series(panel)

    disp_profile = seasonal_profile(series.dispersion, series.timestamps)
    disp = series.dispersion
    if args.deseasonalize:
        n_sessions = len({ts.session_id for ts in series.timestamps})
        if n_sessions < 2:
            log.warning("deseasonalize requested but the panel has a single session; passing through")
        else:
            disp = deseasonalize(series.dispersion, series.timestamps, disp_profile)

    outputs = []
    xsec_path = out_dir / "xsec.csv"
    with open(xsec_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp," + ",".join(XSEC_COLUMNS) + "\n")
        for k, ts in enumerate(series.timestamps):
            fh.write(
                f"{_iso(ts)},{_fmt(disp[k])},{_fmt_missing(series.kurtosis[k])},"
                f"{_fmt(series.s_values[k])},{_fmt(series.aic[k])},{_fmt(series.market[k])}\n"
            )
    outputs.append(xsec_path)

    seasonal_path = out_dir / "seasonal_dispersion.csv"
    with open(seasonal_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("intraday_bin,mean_dispersion,count\n")
        for b, m, c in zip(disp_profile.bin_index, disp_profile.mean_value, disp_profile.count):
            fh.write(f"{int(b)},{_fmt(m)},{int(c)}\n")
    outputs.append(seasonal_path)

    if args.aic_old_window is not None:
        from .xsec import aic_old

        values = aic_old(panel, args.aic_old_window)
        aicold_path = out_dir / "xsec_aicold.csv"
        with open(aicold_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("timestamp,aic_old\n")
            for ts, v in zip(series.timestamps, values):
                fh.write(f"{_iso(ts)},{_fmt_missing(v)}\n")
        outputs.append(aicold_path)

    resolved = {
        "command": "analyze",
        "panel": str(args.panel),
        "input_type": args.input_type,
        "format": args.format,
        "drop_overnight": args.drop_overnight,
        "deseasonalize": args.deseasonalize,
        "aic_old_window": args.aic_old_window,
        "min_coverage": args.min_coverage,
        "ffill_limit": args.ffill_limit,
        "threads": threads,
    }
    _write_manifest(out_dir, "analyze", resolved, None, outputs, started)
    return EXIT_OK


def _fit_payload(fit) -> dict:
    return {
        "params": fit.params,
        "residual_rms": fit.residual_rms,
        "lag_range": list(fit.lag_range),
        "excluded_lags": list(fit.excluded_lags),
    }


def _write_lag_csv(path: Path, fn, value_name: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"lag,{value_name},count\n")
        for lag, v, c in zip(fn.lags, fn.values, fn.counts):
            fh.write(f"{int(lag)},{_fmt(v)},{int(c)}\n")


def cmd_variogram(args) -> int:
    started = _now()
    threads = _resolve_threads(args.threads)
    cols = _read_xsec(args.xsec)
    if args.column not in XSEC_COLUMNS:
        raise CliInputError(f"--column must be one of {XSEC_COLUMNS}")
    series = cols[args.column]
    if not 1 <= args.max_lag < series.size:
        raise CliInputError(f"--max-lag must lie in [1, {series.size - 1}]")
    lag_min, lag_max = args.fit_range
    out_dir = _ensure_out_dir(args.out)

    vario = variogram(series, args.max_lag)
    acf = autocorrelation(series, args.max_lag)
    vario_path = out_dir / "variogram.csv"
    acf_path = out_dir / "acf.csv"
    _write_lag_csv(vario_path, vario, "V")
    _write_lag_csv(acf_path, acf, "C")

    fits: dict[str, object] = {"column": args.column, "fit_range": [lag_min, lag_max]}
    try:
        fits["variogram"] = _fit_payload(fit_power_law(vario, lag_min, lag_max))
    except ValueError as exc:
        fits["variogram"] = {"error": str(exc)}
    try:
        fits["acf"] = _fit_payload(fit_power_law(acf, lag_min, lag_max))
    except ValueError as exc:
        fits["acf"] = {"error": str(exc)}
    fit_path = out_dir / "fit.json"
    _write_json(fit_path, fits)

    resolved = {
        "command": "variogram",
        "xsec": str(args.xsec),
        "column": args.column,
        "max_lag": args.max_lag,
        "fit_range": [lag_min, lag_max],
        "threads": threads,
    }
    _write_manifest(out_dir, "variogram", resolved, None, [vario_path, acf_path, fit_path], started)
    return EXIT_OK


def cmd_leverage(args) -> int:
    started = _now()
    threads = _resolve_threads(args.threads)
    cols = _read_xsec(args.xsec)
    series = cols["aic"]
    if not 1 <= args.max_lag < series.size:
        raise CliInputError(f"--max-lag must lie in [1, {series.size - 1}]")
    out_dir = _ensure_out_dir(args.out)

    lev = leverage(series, cols["market"], args.max_lag, normalize=args.normalize_returns)
    lev_path = out_dir / "leverage.csv"
    _write_lag_csv(lev_path, lev, "L")

    try:
        payload = _fit_payload(fit_exponential(lev))
    except ValueError as exc:
        payload = {"error": str(exc)}
    fit_path = out_dir / "fit.json"
    _write_json(fit_path, payload)

    resolved = {
        "command": "leverage",
        "xsec": str(args.xsec),
        "max_lag": args.max_lag,
        "normalize_returns": args.normalize_returns,
        "threads": threads,
    }
    _write_manifest(out_dir, "leverage", resolved, None, [lev_path, fit_path], started)
    return EXIT_OK


def cmd_aicvol(args) -> int:
    started = _now()
    threads = _resolve_threads(args.threads)
    cols = _read_xsec(args.xsec)
    if args.bin_width <= 0:
        raise CliInputError("--bin-width must be positive")
    out_dir = _ensure_out_dir(args.out)

    curve = aic_vs_volatility(cols["aic"], cols["market"], args.bin_width)
    curve_path = out_dir / "aic_vs_vol.csv"
    with open(curve_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bin_center,mean_aic,count\n")
        for center, mean, count in zip(curve.bin_centers, curve.means, curve.counts):
            fh.write(f"{_fmt(center)},{_fmt(mean)},{int(count)}\n")

    resolved = {
        "command": "aicvol",
        "xsec": str(args.xsec),
        "bin_width": args.bin_width,
        "threads": threads,
    }
    _write_manifest(out_dir, "aicvol", resolved, None, [curve_path], started)
    return EXIT_OK


def _parse_window(spec: str, n_rows: int) -> tuple[str, int, int]:
    try:
        name, _, bounds = spec.partition("=")
        lo_text, _, hi_text = bounds.partition(":")
        lo, hi = int(lo_text), int(hi_text)
    except ValueError:
        raise CliInputError(f"bad window spec {spec!r}; expected name=start:end") from None
    if not name:
        raise CliInputError(f"bad window spec {spec!r}; expected name=start:end")
    if lo >= hi:
        raise CliInputError(f"window {name!r} is empty: [{lo}, {hi})")
    if lo < 0 or hi > n_rows:
        raise CliInputError(f"window {name!r} [{lo}, {hi}) outside data range [0, {n_rows})")
    return name, lo, hi


def cmd_report(args) -> int:
    started = _now()
    threads = _resolve_threads(args.threads)
    cols = _read_xsec(args.xsec)
    n_rows = cols["s"].size
    if not args.window:
        raise CliInputError("at least one --window name=start:end is required")
    out_dir = _ensure_out_dir(args.out)

    windows = {}
    for spec in args.window:
        name, lo, hi = _parse_window(spec, n_rows)
        disp = cols["dispersion"][lo:hi]
        kurt = cols["kurtosis"][lo:hi]
        s_vals = cols["s"][lo:hi]
        aic = cols["aic"][lo:hi]

        pair = np.isfinite(disp) & np.isfinite(kurt)
        if pair.sum() >= 2 and np.std(disp[pair]) > 0 and np.std(kurt[pair]) > 0:
            dk_corr = float(np.corrcoef(disp[pair], kurt[pair])[0, 1])
        else:
            dk_corr = None
        try:
            bim = float(bimodality_coefficient(s_vals))
        except ValueError:
            bim = None
        edges, counts = histogram(s_vals, n_bins=20, value_range=(-1.0, 1.0))

        windows[name] = {
            "start": lo,
            "end": hi,
            "dispersion_kurtosis_correlation": dk_corr,
            "s_bimodality": bim,
            "s_histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
            "mean_aic": float(np.nanmean(aic)),
        }

    report_path = out_dir / "report.json"
    _write_json(report_path, {"windows": windows})

    resolved = {
        "command": "report",
        "xsec": str(args.xsec),
        "windows": list(args.window),
        "threads": threads,
    }
    _write_manifest(out_dir, "report", resolved, None, [report_path], started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panic-lab",
        description="Simulate volatility-feedback market panics and compute cross-sectional panic statistics.",
    )
    parser.add_argument("--version", action="version", version=f"panic-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (0 = auto; results are identical for any value)")

    p_sim = sub.add_parser("simulate", help="run a simulation from a JSON config")
    p_sim.add_argument("--config", required=True, help="JSON config path")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    add_threads(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="per-bar cross-sectional statistics of a panel")
    p_an.add_argument("panel", help="panel CSV (wide returns by default)")
    p_an.add_argument("--out", required=True)
    p_an.add_argument("--input-type", choices=("returns", "prices"), default="returns",
                      help="treat the panel as returns (default) or prices to be ingested")
    p_an.add_argument("--format", choices=("wide", "long"), default="wide",
                      help="CSV layout when --input-type prices")
    p_an.add_argument("--drop-overnight", action="store_true",
                      help="drop returns spanning a session boundary (prices input only)")
    p_an.add_argument("--min-coverage", type=float, default=0.9)
    p_an.add_argument("--ffill-limit", type=int, default=2)
    p_an.add_argument("--deseasonalize", action="store_true",
                      help="divide the dispersion column by its intraday profile")
    p_an.add_argument("--aic-old-window", type=int, default=None,
                      help="also write xsec_aicold.csv with this trailing window")
    add_threads(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_var = sub.add_parser("variogram", help="variogram + autocorrelation of an xsec column")
    p_var.add_argument("xsec", help="xsec.csv from the analyze command")
    p_var.add_argument("--out", required=True)
    p_var.add_argument("--column", default="aic")
    p_var.add_argument("--max-lag", type=int, default=200)
    p_var.add_argument("--fit-range", type=int, nargs=2, default=(1, 100), metavar=("LO", "HI"))
    add_threads(p_var)
    p_var.set_defaults(func=cmd_variogram)

    p_lev = sub.add_parser("leverage", help="lagged correlation-vs-return curve with exponential fit")
    p_lev.add_argument("xsec")
    p_lev.add_argument("--out", required=True)
    p_lev.add_argument("--max-lag", type=int, default=40)
    p_lev.add_argument("--normalize-returns", action="store_true",
                       help="scale market returns to unit standard deviation first")
    add_threads(p_lev)
    p_lev.set_defaults(func=cmd_leverage)

    p_av = sub.add_parser("aicvol", help="mean correlation statistic in volatility bins")
    p_av.add_argument("xsec")
    p_av.add_argument("--out", required=True)
    p_av.add_argument("--bin-width", type=float, default=0.25)
    add_threads(p_av)
    p_av.set_defaults(func=cmd_aicvol)

    p_rep = sub.add_parser("report", help="per-window panic-signature summary")
    p_rep.add_argument("xsec")
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--window", action="append", default=[], metavar="NAME=START:END",
                       help="half-open row range; repeatable")
    add_threads(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
