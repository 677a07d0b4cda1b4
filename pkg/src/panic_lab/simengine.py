"""Coupled multi-stock simulator.

Each stock follows a log-price random walk whose variance feeds back on its
own past moves through a power-law kernel, with an optional sign-asymmetric
(skew) term that makes negative moves raise volatility. Across stocks, the
noise shares a common factor whose weight is the square of a correlation
state s; s relaxes in a double-well potential whose shape is controlled by
the gap between current market volatility and a trailing critical level, so
volatility bursts flip the market into a correlated, all-together regime.
Exogenous (base-volatility) and endogenous (single-stock return) shocks can
be scheduled to trigger that transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ReturnPanel, Timestamp

__all__ = [
    "SimConfig",
    "ShockEvent",
    "SimResult",
    "kernel_weights",
    "update_volatility",
    "step_correlation",
    "correlated_noise",
    "simulate",
]

# 2000-01-03T09:30:00Z; simulated bars are 1 s apart so any realistic horizon
# stays inside a single calendar date (= a single session after a CSV round trip).
_SIM_EPOCH = 946_891_800
_BAR_SECONDS = 1

# contraction beyond which the unit Euler step of the correlation state
# switches to its exponential-tail limiter
_EULER_LIMIT = 0.5


@dataclass(frozen=True)
class SimConfig:
    """All model and schedule parameters.

    ``sigma0`` (and ``ShockEvent.sigma_shock``) are annualized; per-step
    volatilities divide by ``sqrt(steps_per_year)``. Set ``steps_per_year=1``
    to work directly in per-step units.

    Attributes
    ----------
    g, alpha_mem, n_terms : feedback strength, kernel exponent and truncation
        of the power-law memory ``g / tau**alpha_mem``.
    kappa, skew_sign : skew strength and its sign convention. ``skew_sign=-1``
        (default) makes negative past moves raise volatility, which produces
        the empirically observed leverage effect.
    b, noise_amp, phase_coupling : cubic coefficient, driving-noise amplitude
        and volatility-gap coupling of the correlation state dynamics.
    sigma_c_window : trailing window (steps) for the critical volatility,
        a population standard deviation of market returns.
    vol_smooth : trailing window (steps) for the market-volatility estimate,
        a mean of absolute market returns; 1 reproduces "absolute value of
        the most recent market return".
    vol_floor : lower bound on variance as a fraction of the base variance.
    burn_in : constant-volatility steps used to seed the feedback history,
        discarded from the output; must be >= n_terms.
    """

    n_stocks: int = 100
    n_steps: int = 2000
    burn_in: int = 100
    g: float = 0.35
    kappa: float = 0.15
    alpha_mem: float = 1.15
    sigma0: float = 0.20
    n_terms: int = 100
    b: float = 0.01
    noise_amp: float = 0.1
    phase_coupling: float = 1.0
    sigma_c_window: int = 100
    vol_floor: float = 0.01
    vol_smooth: int = 1
    skew_sign: int = -1
    steps_per_year: int = 252
    s_init: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_stocks < 2:
            raise ValueError("n_stocks must be >= 2")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.n_terms < 1:
            raise ValueError("n_terms must be >= 1")
        if self.burn_in < self.n_terms:
            raise ValueError("burn_in must be >= n_terms so the kernel has history")
        if not self.sigma0 > 0.0:
            raise ValueError("sigma0 must be positive")
        if not self.b > 0.0:
            raise ValueError("b must be positive")
        if not 0.0 < self.vol_floor <= 1.0:
            raise ValueError("vol_floor must lie in (0, 1]")
        if self.noise_amp < 0.0:
            raise ValueError("noise_amp must be >= 0")
        if self.sigma_c_window < 2:
            raise ValueError("sigma_c_window must be >= 2")
        if self.vol_smooth < 1:
            raise ValueError("vol_smooth must be >= 1")
        if self.skew_sign not in (-1, 1):
            raise ValueError("skew_sign must be -1 or +1")
        if self.steps_per_year < 1:
            raise ValueError("steps_per_year must be >= 1")
        if not -1.0 <= self.s_init <= 1.0:
            raise ValueError("s_init must lie in [-1, 1]")

    @property
    def sigma0_step(self) -> float:
        """Per-step base volatility."""
        return self.sigma0 / math.sqrt(self.steps_per_year)


@dataclass(frozen=True)
class ShockEvent:
    """A scheduled volatility shock.

    ``kind="exogenous"``: the base volatility becomes sigma0 + sigma_shock for
    ``duration`` steps starting at ``start``. ``kind="endogenous"``: at step
    ``start`` the noise of ``stock_index`` is overridden so its return equals
    ``magnitude_std`` times its volatility that step.
    """

    kind: str
    start: int
    duration: int = 1
    sigma_shock: float = 0.0
    stock_index: int = 0
    magnitude_std: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exogenous", "endogenous"):
            raise ValueError(f"kind must be 'exogenous' or 'endogenous', got {self.kind!r}")
        if self.start < 0:
            raise ValueError("start must be >= 0")
        if self.kind == "exogenous" and self.duration < 1:
            raise ValueError("exogenous shocks need duration >= 1")
        if self.kind == "endogenous" and self.magnitude_std == 0.0:
            raise ValueError("endogenous shocks need magnitude_std != 0")


@dataclass(frozen=True)
class SimResult:
    """Simulated panel plus the per-step state paths behind it.

    ``vols`` holds per-stock volatilities (not variances); ``clamp_counts``
    is the number of stocks whose variance hit the floor at each step.
    """

    returns: ReturnPanel
    vols: np.ndarray
    s_path: np.ndarray
    sigma_m_path: np.ndarray
    sigma_c_path: np.ndarray
    clamp_counts: np.ndarray
    config_echo: SimConfig
    shocks_echo: tuple[ShockEvent, ...]

    def __post_init__(self):
        for name in ("vols", "s_path", "sigma_m_path", "sigma_c_path", "clamp_counts"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def clamp_rate(self) -> float:
        """Fraction of (step, stock) variance evaluations that hit the floor."""
        t, n = self.vols.shape
        return float(self.clamp_counts.sum() / (t * n))


def kernel_weights(g: float, alpha_mem: float, n_terms: int) -> np.ndarray:
    """Power-law memory kernel ``g / tau**alpha_mem`` for tau = 1..n_terms."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    tau = np.arange(1, n_terms + 1, dtype=float)
    return g / tau**alpha_mem


def _bracket_weights(params: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Scale-free quadratic and linear lag weights of the variance bracket.

    The quadratic weights carry the 1/tau diffusive normalization and the
    linear (skew) weights the 1/sqrt(tau) one; division by the volatility
    normalizer happens at evaluation time.
    """
    tau = np.arange(1, params.n_terms + 1, dtype=float)
    w = kernel_weights(params.g, params.alpha_mem, params.n_terms)
    quad = w / tau
    lin = params.skew_sign * params.kappa * w / np.sqrt(tau)
    return quad, lin


def _norm_variance(prior_sq_mean: float, sigma_base: float, vol_floor: float) -> float:
    """Variance normalizer for the bracket sums.

    The trailing mean of squared one-step moves, floored at
    ``vol_floor * sigma_base**2``; ``sigma_base**2`` itself when no prior
    moves exist. Anchoring the bracket to the stock's own trailing scale
    keeps the feedback stationary: normalizing by a fixed base volatility
    instead makes the squared-move terms supercritical at the default
    feedback strength and the paths diverge.
    """
    if prior_sq_mean is None:
        return sigma_base * sigma_base
    return max(prior_sq_mean, vol_floor * sigma_base * sigma_base)


def update_volatility(
    log_price_history,
    params: SimConfig,
    sigma_base: float,
    sigma_norm: float | None = None,
) -> float:
    """Next-step return variance of one stock given its log-price history.

    Evaluates ``sigma_base**2`` times the feedback bracket: 1 plus the
    kernel-weighted squared past moves plus the skew-signed kernel-weighted
    signed past moves, floored at ``vol_floor * sigma_base**2``.
    ``sigma_base`` is the per-step base volatility (elevated inside an
    exogenous shock window).

    Past moves are measured relative to ``sigma_norm``. When it is None, the
    normalizer is derived from the history itself: the root mean square of
    the one-step moves over the kernel window, excluding the most recent move
    (so the newest innovation is judged against strictly prior scale), with
    ``sigma_base`` as the fallback when no prior moves exist. In a panel
    simulation the caller supplies the trailing cross-sectional normalizer
    instead, so that a market-wide base-volatility shock raises every
    stock's bracket together.
    """
    y = np.asarray(log_price_history, dtype=float)
    k = params.n_terms
    if y.ndim != 1 or y.size < k + 1:
        raise ValueError(f"need at least n_terms + 1 = {k + 1} log prices, got {y.size}")
    if not sigma_base > 0.0:
        raise ValueError("sigma_base must be positive")
    if sigma_norm is None:
        inc = np.diff(y)
        prior = inc[:-1][-k:]
        prior_sq = float(np.mean(prior * prior)) if prior.size else None
        norm2 = _norm_variance(prior_sq, sigma_base, params.vol_floor)
    else:
        if not sigma_norm > 0.0:
            raise ValueError("sigma_norm must be positive")
        norm2 = sigma_norm * sigma_norm
    quad, lin = _bracket_weights(params)
    diffs = y[-1] - y[-1 - k : -1][::-1]  # entry tau-1 is y_t - y_{t-tau}
    bracket = 1.0 + (quad @ (diffs * diffs)) / norm2 + (lin @ diffs) / math.sqrt(norm2)
    var = sigma_base**2 * bracket
    return max(var, params.vol_floor * sigma_base**2)


def step_correlation(s: float, sigma_m: float, sigma_c: float, params: SimConfig, noise: float) -> float:
    """One Euler update (dt = 1) of the correlation state in its double well.

    The linear coefficient ``a = phase_coupling * (sigma_c - sigma_m)`` flips
    sign when market volatility crosses the critical level: below it the only
    stable point is 0, above it the stable points move to +/- sqrt(-a/b).
    The result is clamped to [-1, 1] so s**2 is a valid correlation.

    The drift update is ``s * (1 - x)`` with ``x = a + b * s**2``. A plain
    unit Euler step is unstable for x > 1 (it overshoots through zero and
    oscillates between the clamps instead of relaxing), so for x > 1/2 the
    contraction factor follows a C1-matched exponential tail
    ``(1 - x0) * exp(-(x - x0) / (1 - x0))``: stable, sign-preserving and
    never absorbing at zero. Below x = 1/2, including all weak-coupling
    regimes, the update is exactly Euler.
    """
    if not -1.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [-1, 1], got {s}")
    a = params.phase_coupling * (sigma_c - sigma_m)
    x = a + params.b * s * s
    if x <= _EULER_LIMIT:
        factor = 1.0 - x
    else:
        scale = 1.0 - _EULER_LIMIT
        factor = scale * math.exp(-(x - _EULER_LIMIT) / scale)
    s_new = s * factor + params.noise_amp * noise
    return min(1.0, max(-1.0, s_new))


def correlated_noise(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """n unit-variance Gaussians with common pairwise correlation rho.

    One-factor construction: ``sqrt(rho) * z0 + sqrt(1 - rho) * z_i`` with a
    shared z0. The generator is advanced by exactly n + 1 standard normals.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    z0 = rng.standard_normal()
    z = rng.standard_normal(n)
    return math.sqrt(rho) * z0 + math.sqrt(1.0 - rho) * z


def _validate_shocks(config: SimConfig, shocks: Sequence[ShockEvent]) -> None:
    for ev in shocks:
        if not 0 <= ev.start < config.n_steps:
            raise ValueError(f"shock start {ev.start} outside [0, {config.n_steps})")
        if ev.kind == "endogenous" and not 0 <= ev.stock_index < config.n_stocks:
            raise ValueError(f"stock_index {ev.stock_index} outside [0, {config.n_stocks})")
        if ev.kind == "exogenous" and config.sigma0 + ev.sigma_shock <= 0.0:
            raise ValueError("sigma0 + sigma_shock must stay positive")


def simulate(config: SimConfig, shocks: Sequence[ShockEvent] = ()) -> SimResult:
    """Run the coupled simulation and return the post-burn-in result.

    Per step: the market-volatility estimate (trailing mean of absolute
    market returns over ``vol_smooth`` steps) and the critical level (trailing
    standard deviation of market returns over ``sigma_c_window`` steps) drive
    one correlation-state update; stock noise is drawn with common pairwise
    correlation s**2; per-stock variances come from the feedback bracket,
    with the base volatility raised inside any active exogenous shock window;
    an endogenous shock overrides one stock's noise so its return is exactly
    ``magnitude_std`` times its volatility. The first ``burn_in`` steps run
    the g = 0 dynamics (constant volatility) to seed the feedback history and
    are discarded. Fully deterministic given ``config.seed``; thread count
    never affects the result.

    Returns
    -------
    SimResult
    """
    shocks = tuple(shocks)
    _validate_shocks(config, shocks)
    rng = np.random.default_rng(config.seed)

    n = config.n_stocks
    burn = config.burn_in
    total = burn + config.n_steps
    k = config.n_terms
    root_spy = math.sqrt(config.steps_per_year)

    base_ann = np.full(total, config.sigma0)
    for ev in shocks:
        if ev.kind == "exogenous":
            lo = burn + ev.start
            hi = min(total, lo + ev.duration)
            base_ann[lo:hi] += ev.sigma_shock
    base_step = base_ann / root_spy

    endo: dict[int, list[ShockEvent]] = {}
    for ev in shocks:
        if ev.kind == "endogenous":
            endo.setdefault(burn + ev.start, []).append(ev)

    quad_w, lin_w = _bracket_weights(config)
    feedback_on = config.g != 0.0

    y = np.zeros((total + 1, n))
    r_m = np.empty(total)
    out = config.n_steps
    returns = np.empty((out, n))
    vols = np.empty((out, n))
    s_path = np.empty(out)
    sm_path = np.empty(out)
    sc_path = np.empty(out)
    clamp_counts = np.zeros(out, dtype=int)

    s = float(config.s_init)
    for t in range(total):
        if t == 0:
            sigma_m = 0.0
        else:
            w0 = max(0, t - config.vol_smooth)
            sigma_m = float(np.mean(np.abs(r_m[w0:t])))
        if t >= 2:
            c0 = max(0, t - config.sigma_c_window)
            sigma_c = float(np.std(r_m[c0:t]))
        else:
            sigma_c = 0.0

        s = step_correlation(s, sigma_m, sigma_c, config, rng.standard_normal())
        rho = min(1.0, s * s)

        sb = base_step[t]
        if t < burn or not feedback_on:
            sig = np.full(n, sb)
            clamped = 0
        else:
            # pooled trailing mean of squared one-step moves over the kernel
            # window, excluding the latest step
            lo = max(0, t - 1 - k)
            window = y[lo + 1 : t] - y[lo : t - 1]
            if window.size:
                norm2 = max(float(np.mean(window * window)), config.vol_floor * sb * sb)
            else:
                norm2 = sb * sb
            d = y[t] - y[t - k : t][::-1]
            var = sb * sb * (
                1.0 + (quad_w @ (d * d)) / norm2 + (lin_w @ d) / math.sqrt(norm2)
            )
            floor = config.vol_floor * sb * sb
            low = var < floor
            clamped = int(np.count_nonzero(low))
            if clamped:
                var = np.maximum(var, floor)
            sig = np.sqrt(var)

        dy = sig * correlated_noise(n, rho, rng)
        for ev in endo.get(t, ()):
            dy[ev.stock_index] = ev.magnitude_std * sig[ev.stock_index]
        y[t + 1] = y[t] + dy
        r_m[t] = dy.mean()

        j = t - burn
        if j >= 0:
            returns[j] = dy
            vols[j] = sig
            s_path[j] = s
            sm_path[j] = sigma_m
            sc_path[j] = sigma_c
            clamp_counts[j] = clamped

    grid = [Timestamp(_SIM_EPOCH + _BAR_SECONDS * j, 0, j) for j in range(out)]
    symbols = [f"S{i:03d}" for i in range(n)]
    panel = ReturnPanel(tuple(grid), tuple(symbols), returns)
    return SimResult(
        returns=panel,
        vols=vols,
        s_path=s_path,
        sigma_m_path=sm_path,
        sigma_c_path=sc_path,
        clamp_counts=clamp_counts,
        config_echo=config,
        shocks_echo=shocks,
    )
