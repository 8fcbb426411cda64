"""Experiment-design layer.

Volume time and diffusion-coefficient recovery from the decay/plateau
crossing, the oscillating-signal probability, Fisher information for
frequency estimation (direct lag sum and closed forms for the confined
evaporating model), and least-squares fitting of the two-regime composite
model to sampled correlation curves.

Fisher-information convention: the physically omitted prefactors are set
to 1 and every value is quoted per shot, i.e. the raw correlated-pair sum is
multiplied by τ̃/T. All cross-model statements are ratios, which this common
scaling leaves untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from .evaporating import SimpleModelParams, g_simple_model
from .freediff import g_free
from .geometry import CylinderGeometry
from .series import CorrelationSeries
from .sticky import plateau_ideal

_SQRT_PI = math.sqrt(math.pi)
_FREE_AMP = 32.0 / (15.0 * _SQRT_PI)


class FitFailureError(RuntimeError):
    """Composite-model fit did not converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class FisherSetup:
    """Frequency-estimation protocol: target δ, total time T, shot time τ̃.

    All times in T_D units, δ in rad per T_D. The weak-signal expressions
    assume Φ_rms² ≪ 1.
    """

    delta: float
    total_time: float
    shot_time: float
    phi_rms: float = 1.0
    model: str | None = None

    def __post_init__(self):
        if not (self.total_time >= self.shot_time > 0):
            raise ValueError("need T >= shot time > 0")
        if self.delta < 0:
            raise ValueError("target frequency must be non-negative")
        if self.phi_rms < 0:
            raise ValueError("phase amplitude must be non-negative")

    @property
    def n_shots(self) -> int:
        return int(self.total_time / self.shot_time)


@dataclass(frozen=True)
class FisherEvapClosed:
    total: float
    dominant: float
    terms: tuple


@dataclass(frozen=True)
class FisherRatios:
    confined_over_free: float
    evaporating_over_free: float
    flags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FitResult:
    params: SimpleModelParams
    residual_norm: float
    sensitivity: np.ndarray
    n_points: int


def volume_time(plateau: float) -> float:
    """Crossing of the free-diffusion tail with the plateau, in T_D units."""
    if plateau <= 0:
        raise ValueError("plateau amplitude must be positive")
    return (_FREE_AMP / plateau) ** (2.0 / 3.0)


def estimate_diffusion(tau_v_measured: float, d: float, plateau: float) -> float:
    """Diffusion coefficient from a measured crossover time (any time unit)."""
    if tau_v_measured <= 0 or d <= 0:
        raise ValueError("crossover time and depth must be positive")
    return volume_time(plateau) * d * d / tau_v_measured


def signal_probability(t, delta, phi_rms, g):
    """Outcome probability [1 + Φ_rms²·cos(δt)·G(t)]/2 of the phase protocol."""
    t, g = np.asarray(t, dtype=float), np.asarray(g, dtype=float)
    if np.any(phi_rms ** 2 * np.abs(g) > 1.0 + 1e-12):
        raise ValueError("Phi_rms^2 |G| exceeds 1: not a valid probability")
    out = 0.5 * (1.0 + phi_rms ** 2 * np.cos(delta * t) * g)
    return out if out.ndim else float(out)


def _lag_values(setup: FisherSetup, source):
    n = setup.n_shots
    if n < 2:
        raise ValueError("total time must span at least two shots")
    lags = np.arange(1, n) * setup.shot_time
    if isinstance(source, CorrelationSeries):
        if source.times[-1] < lags[-1] or source.times[0] > lags[0]:
            raise ValueError(
                f"series covers [{source.times[0]:g}, {source.times[-1]:g}] "
                f"but lags reach {lags[-1]:g}")
        g = source.interpolate(lags)
    else:
        g = np.asarray(source(lags), dtype=float)
    return lags, g


def fisher_direct(setup: FisherSetup, source) -> float:
    """Per-shot Fisher information from the correlated-pair lag sum.

    source is a CorrelationSeries (log-t interpolated onto the lag grid) or a
    callable G(t̃). Summation is numpy pairwise for reproducibility.
    """
    lags, g = _lag_values(setup, source)
    n = setup.n_shots
    counts = n - np.arange(1, n)
    terms = counts * lags ** 2 * np.sin(setup.delta * lags) ** 2 * g ** 2
    return float(setup.phi_rms ** 4 * (setup.shot_time / setup.total_time)
                 * np.sum(terms))


def fisher_evap_closed(setup: FisherSetup,
                       params: SimpleModelParams) -> FisherEvapClosed:
    """Closed-form per-shot information of the two-regime composite model.

    Six-term integral approximation of the lag sum plus the single dominant
    plateau term; both carry the same τ̃/T per-shot scaling as fisher_direct.
    All times normalized to T_D.
    """
    d, bigt, tau = setup.delta, setup.total_time, setup.shot_time
    b2, g_pl = params.b_rms_sq, params.plateau
    tv, tev = params.tau_v, params.tau_ev_eff
    ex = math.exp(-2.0 * bigt / tev)

    t1 = b2 ** 2 * tv ** 3 * d ** 2 / (4.0 * tau ** 2 * (1.0 + tv ** 3 * d ** 2))
    t2 = g_pl ** 2 * tev * bigt * (tev ** 2 - 2.0 * bigt ** 2 * ex) / (8.0 * tau ** 2)
    t3 = (g_pl ** 2 * tev / (16.0 * tau ** 2)
          * (3.0 * tev ** 3 - ex * (4.0 * bigt ** 3 + 6.0 * bigt ** 2 * tev
                                    + 6.0 * bigt * tev ** 2 + 3.0 * tev ** 3)))
    t4 = (b2 * g_pl * tev * tv / (4.0 * (tev + tv) ** 2)
          * (2.0 * math.sqrt(bigt)
             * (3.0 * tev * tv + 2.0 * bigt * (tev + tv))
             * math.exp(-bigt / tev - bigt / tv)
             - 3.0 * _SQRT_PI * tev * tv * math.sqrt(tev / (tev + tv))))
    t5 = (b2 * g_pl * bigt * tev * tv * _SQRT_PI / (2.0 * (tev + tv))
          * math.sqrt(tev / (tev + tv)))
    t6 = b2 * bigt / 8.0 * math.log1p(2.0 * tev * d ** 2 + tev ** 4 * d ** 4)

    scale = setup.phi_rms ** 4 * tau / bigt
    terms = tuple(scale * t for t in (t1, t2, t3, t4, t5, t6))
    dominant = (scale * g_pl ** 2 * tev ** 2 / (16.0 * tau ** 2)
                * (2.0 * tev * bigt + 2.0 * bigt ** 2 * ex)
                * math.tanh(d ** 2 * tev ** 2))
    return FisherEvapClosed(total=float(sum(terms)), dominant=float(dominant),
                            terms=terms)


def fisher_ratios(setup: FisherSetup, geom: CylinderGeometry, tau_ev: float,
                  plateau: float | None = None) -> FisherRatios:
    """Confined/free and fast-evaporation/free information ratios.

    Confined: G_pl⁴T²/(Φ⁴·ln δT); fast evaporation:
    ln(1 + τ_ev²δ² + τ_ev⁴δ⁴)/(8·ln δT). Regime flags mark whether the
    closed forms are trustworthy; values are returned regardless.
    """
    g_pl = plateau if plateau is not None else plateau_ideal(geom)
    d, bigt, phi = setup.delta, setup.total_time, setup.phi_rms
    log_dt = math.log(d * bigt) if d * bigt > 1.0 else float("nan")
    ratio1 = g_pl ** 4 * bigt ** 2 / (phi ** 4 * log_dt)
    ratio2 = math.log1p(tau_ev ** 2 * d ** 2 + tau_ev ** 4 * d ** 4) / (8.0 * log_dt)
    tau_v = volume_time(g_pl)
    flags = {
        "confined_valid": bool(bigt > 10.0 * tau_v and d * bigt > 10.0),
        "evaporating_valid": bool(tau_ev <= 1.0 and d * bigt > 10.0
                                  and d * tau_ev < 1.0),
    }
    return FisherRatios(float(ratio1), float(ratio2), flags)


def _fit_seed(times, values):
    """Coarse grid over the two time scales, amplitudes from the data."""
    b2_0 = values[0]
    g_top = values.max()
    best, best_sse = None, np.inf
    logv = np.log(values)
    for tv in np.geomspace(0.1, 100.0, 12):
        for tev in np.geomspace(1.0, 1e5, 16):
            for g_pl in np.geomspace(g_top * 1e-4, g_top, 10):
                model = (b2_0 * g_free(times) * np.exp(-2.0 * times / tv)
                         + g_pl * np.exp(-times / tev))
                sse = float(np.sum((np.log(np.maximum(model, 1e-300)) - logv) ** 2))
                if sse < best_sse:
                    best, best_sse = (b2_0, tv, g_pl, tev), sse
    return np.log(np.asarray(best))


def fit_simple_model(series: CorrelationSeries) -> FitResult:
    """Least-squares fit of the composite model in log G over log-t samples."""
    mask = (series.times > 0) & (series.values > 0)
    times, values = series.times[mask], series.values[mask]
    if times.size < 8:
        raise FitFailureError("need at least 8 positive samples to fit",
                              {"n_points": int(times.size)})

    def residuals(logp):
        b2, tv, g_pl, tev = np.exp(logp)
        model = (b2 * g_free(times) * np.exp(-2.0 * times / tv)
                 + g_pl * np.exp(-times / tev))
        return np.log(np.maximum(model, 1e-300)) - np.log(values)

    res = least_squares(residuals, _fit_seed(times, values),
                        method="lm", xtol=1e-14, ftol=1e-14, max_nfev=4000)
    if not res.success or not np.all(np.isfinite(res.x)):
        raise FitFailureError("composite-model fit did not converge",
                              {"status": res.status, "message": res.message})
    b2, tv, g_pl, tev = np.exp(res.x)
    params = SimpleModelParams(b2, tv, g_pl, tev)
    resid_norm = float(np.linalg.norm(res.fun))
    jtj = res.jac.T @ res.jac
    try:
        sens = np.sqrt(np.diag(np.linalg.inv(jtj))) * max(resid_norm, 1e-16)
    except np.linalg.LinAlgError:
        sens = np.full(4, np.inf)
    return FitResult(params, resid_norm, sens, int(times.size))


def measure_crossing(series: CorrelationSeries):
    """Decay/plateau crossing time and normalized plateau from sampled data.

    The first sample (assumed to sit well before the crossover) provides the
    amplitude reference. The plateau is the median over the last half decade.
    A bare local power-law fit cannot locate the crossing: the t^{-3/2}
    asymptote is only approached far beyond the crossover (the curve sits at
    ~20% of it one diffusion time in). Instead the unconfined decay shape
    a·g_free(t/s) is fitted over the pre-plateau window and its asymptote is
    intersected with the plateau by bisection. Returns
    (t_cross, plateau_normalized) in the units of the series.
    """
    if len(series) < 8:
        raise ValueError("crossing detection needs at least 8 samples")
    amp = series.values[0]
    if amp <= 0:
        raise ValueError("first sample must be positive")
    times, g = series.times, series.values / amp
    late = times >= times[-1] / math.sqrt(10.0)
    plateau = float(np.median(g[late]))
    if plateau <= 0:
        raise ValueError("no positive plateau level found")
    window = (times > 0) & (g > max(5.0 * plateau, 0.08)) & (g < 0.7)
    if np.count_nonzero(window) < 4:
        raise ValueError("no resolved diffusive window above the plateau")
    tw, gw = times[window], g[window]

    def resid(logp):
        a, s = np.exp(logp)
        return np.log(a * g_free(tw / s)) - np.log(gw)

    # seed the time scale from where the curve passes 0.3 (g_free inverse)
    t_half = float(np.interp(-0.3, -gw, tw))
    s_grid = t_half / np.geomspace(0.1, 10.0, 30)
    s0 = min(s_grid, key=lambda s: float(
        np.sum((np.log(g_free(tw / s)) - np.log(gw)) ** 2)))
    res = least_squares(resid, np.log([1.0, s0]), xtol=1e-14, ftol=1e-14)
    a, s = np.exp(res.x)
    t_cross = brentq(
        lambda t: a * _FREE_AMP * (t / s) ** -1.5 - plateau,
        tw.min() * 1e-3, times[-1] * 1e3)
    return float(t_cross), plateau
