"""Evaporating-wall (Robin boundary) confinement model.

The concentration obeys the diffusion equation with boundary condition
∂C/∂n + η₀ C = 0 on every wall, η₀ = d/(D·τ_ev). Separation of variables
gives axial parity families η_m± (roots of tan conditions) and radial roots
β_p of ξJ₀'(ξ) + η₀R·J₀(ξ) = 0, ξ = βR. Only the n = 0 angular sector
couples to the probed dipolar term.

Times are in units of T_D = d²/D; τ_ev is accepted in the same units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .freediff import g_free
from .geometry import CylinderGeometry, dipole_kernel
from .numerics import RootScanSpec, ScanError, bessel_j, panel_rule, scan_roots
from .series import CorrelationSeries

_MAX_FAMILY = 100  # hard cap on M and P
_TAU_CUT_FACTOR = 1e-4  # retain modes with tau >= tau_00 * this


def _sinc(x):
    """Unnormalized sinc sin(x)/x."""
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class EvapEigenSpectrum:
    eta0: float
    eta_plus: np.ndarray
    eta_minus: np.ndarray
    beta: np.ndarray
    eta_scan: RootScanSpec | None = None
    beta_scan: RootScanSpec | None = None


@dataclass(frozen=True)
class EvapModeTable:
    """Truncated eigenmode expansion of the correlation and survival sums.

    Flat arrays over retained modes; `parity` is +1 for the even (cos) family
    and -1 for the odd (sin) family. `weight` carries the correlation
    amplitude, `mass_weight` the survival-fraction amplitude.
    """

    geom: CylinderGeometry
    tau_ev: float
    spectrum: EvapEigenSpectrum
    m_index: np.ndarray
    p_index: np.ndarray
    parity: np.ndarray
    tau: np.ndarray
    weight: np.ndarray
    weight_err: np.ndarray
    mass_weight: np.ndarray
    truncation: tuple = (0, 0)

    @property
    def tau_slowest(self) -> float:
        return float(self.tau.max())

    @property
    def tau_fastest(self) -> float:
        return float(self.tau.min())


def _eta0(geom: CylinderGeometry, tau_ev: float) -> float:
    if tau_ev <= 0:
        raise ValueError("tau_ev must be positive")
    # d/(D tau_ev_phys) with tau_ev in T_D units
    return 1.0 / (tau_ev * geom.depth)


def solve_eta(geom: CylinderGeometry, tau_ev: float, count: int):
    """First `count` axial roots of each parity family.

    Even family: η₀/η = tan(ηL/2); odd family: −η/η₀ = tan(ηL/2). Each tan
    branch holds exactly one root per family (none for the odd family on the
    first branch), so the scan brackets branch-by-branch between the poles.
    """
    eta0 = _eta0(geom, tau_ev)
    length = geom.height
    poles = [(2 * j + 1) * math.pi / length for j in range(count + 1)]

    # Multiplying the tan conditions through by their denominators gives
    # pole-free forms whose signs at consecutive tan-branch boundaries
    # alternate for every eta0, so the per-branch bracket never fails even
    # in the near-reflective limit eta0 -> 0.
    def f_plus(eta):
        return eta * math.sin(eta * length / 2.0) \
            - eta0 * math.cos(eta * length / 2.0)

    def f_minus(eta):
        return eta0 * math.sin(eta * length / 2.0) \
            + eta * math.cos(eta * length / 2.0)

    plus, minus = [], []
    # even roots live on branches 0..count-1, odd on branches 1..count;
    # the pole-free forms are finite and nonzero at the branch boundaries
    lo = 0.0
    for j in range(count + 1):
        hi = poles[j]
        if j < count:
            plus.append(brentq(f_plus, lo, hi, rtol=8.9e-16, maxiter=200))
        if j > 0:
            minus.append(brentq(f_minus, lo, hi, rtol=8.9e-16, maxiter=200))
        lo = poles[j]

    plus, minus = np.asarray(plus), np.asarray(minus)
    for fam, vals in ((f_plus, plus), (f_minus, minus)):
        if len(vals) != count or np.any(np.diff(vals) <= 0):
            raise ScanError("axial eigenvalue scan missed a branch")
    return plus, minus


def solve_beta(geom: CylinderGeometry, tau_ev: float, count: int):
    """First `count` radial roots β_p of ξJ₀'(ξ) + η₀R·J₀(ξ) = 0."""
    eta0r = _eta0(geom, tau_ev) * geom.radius

    def f(xi):
        j0, dj0 = bessel_j(0, xi)
        return xi * dj0 + eta0r * j0

    spec = RootScanSpec(lo=1e-12, hi=(count + 2.0) * math.pi, step=0.05,
                        max_roots=count + 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        xi = scan_roots(f, spec)
    if xi.size < count:
        raise ScanError(
            f"radial eigenvalue scan found {xi.size} roots, needed {count}")
    return xi[:count] / geom.radius


def _default_truncation(geom: CylinderGeometry, tau_ev: float):
    """(M, P) so every mode with τ ≥ τ₀₀·1e-4 is retained, capped at 100."""
    eta_p, _ = solve_eta(geom, tau_ev, 1)
    beta = solve_beta(geom, tau_ev, 1)
    lam0_sq = beta[0] ** 2 + eta_p[0] ** 2
    lam_max = math.sqrt(lam0_sq / _TAU_CUT_FACTOR)
    m = int(math.ceil(lam_max * geom.height / (2.0 * math.pi))) + 2
    p = int(math.ceil(lam_max * geom.radius / math.pi)) + 2
    return min(m, _MAX_FAMILY), min(p, _MAX_FAMILY)


def _weight_arrays(geom, eta0, eta_plus, eta_minus, beta, nodes_scale=1.0):
    """Correlation and mass weights for all (p, m, parity) modes at once."""
    radius, length, depth = geom.radius, geom.height, geom.depth
    xi = beta * radius
    eta_all = np.concatenate([eta_plus, eta_minus])

    # Quadrature grids resolving the fastest retained oscillation and the
    # form-factor scale near the inner face.
    p_rho = max(int(np.ceil(xi.max() / math.pi)), int(np.ceil(2 * radius / depth)), 4)
    p_z = max(int(np.ceil(eta_all.max() * length / math.pi)),
              int(np.ceil(2 * length / depth)), 4)
    n_nodes = max(int(round(8 * nodes_scale)), 6)
    rho, wr = panel_rule(0.0, radius, p_rho, n_nodes)
    z, wz = panel_rule(depth, depth + length, p_z, n_nodes)

    fmat = dipole_kernel(rho[:, None], z[None, :])
    amat = (wr * rho)[:, None] * fmat * wz[None, :]

    from scipy.special import j0 as _j0
    jmat = _j0(np.outer(beta, rho))  # (P, Nrho)
    zc = z - depth - length / 2.0
    trig_plus = np.cos(np.outer(eta_plus, zc))   # (M, Nz)
    trig_minus = np.sin(np.outer(eta_minus, zc))

    i_plus = jmat @ amat @ trig_plus.T    # (P, M)
    i_minus = jmat @ amat @ trig_minus.T

    j0_xi = _j0(xi)
    norm_p = (8.0 * math.pi ** 2 / geom.volume
              * xi ** 2 / (((eta0 * radius) ** 2 + xi ** 2) * j0_xi ** 2))
    norm_plus = 1.0 / (1.0 + _sinc(eta_plus * length))
    norm_minus = 1.0 / (1.0 - _sinc(eta_minus * length))

    w_plus = norm_p[:, None] * norm_plus[None, :] * i_plus ** 2
    w_minus = norm_p[:, None] * norm_minus[None, :] * i_minus ** 2

    # Survival-fraction (mass) weights: same modes with the form factor
    # replaced by 1 and an overall 1/V.
    m_p = jmat @ (wr * rho)
    z_plus = trig_plus @ wz
    z_minus = trig_minus @ wz
    mw_plus = (norm_p[:, None] * norm_plus[None, :]
               * np.outer(m_p, z_plus) ** 2) / geom.volume
    mw_minus = (norm_p[:, None] * norm_minus[None, :]
                * np.outer(m_p, z_minus) ** 2) / geom.volume
    return w_plus, w_minus, mw_plus, mw_minus


def build_mode_table(geom: CylinderGeometry, tau_ev: float,
                     m_count: int | None = None, p_count: int | None = None,
                     quad=None) -> EvapModeTable:
    """Assemble decay times and weights of the truncated mode expansion."""
    if m_count is None or p_count is None:
        m_auto, p_auto = _default_truncation(geom, tau_ev)
        m_count = m_count or m_auto
        p_count = p_count or p_auto
    eta0 = _eta0(geom, tau_ev)
    eta_plus, eta_minus = solve_eta(geom, tau_ev, m_count)
    beta = solve_beta(geom, tau_ev, p_count)
    spectrum = EvapEigenSpectrum(eta0, eta_plus, eta_minus, beta)

    w_p, w_m, mw_p, mw_m = _weight_arrays(geom, eta0, eta_plus, eta_minus, beta)
    w_p2, w_m2, _, _ = _weight_arrays(geom, eta0, eta_plus, eta_minus, beta,
                                      nodes_scale=1.5)

    d2 = geom.depth ** 2
    tau_plus = 1.0 / (d2 * (beta[:, None] ** 2 + eta_plus[None, :] ** 2))
    tau_minus = 1.0 / (d2 * (beta[:, None] ** 2 + eta_minus[None, :] ** 2))

    p_idx, m_idx = np.meshgrid(np.arange(p_count), np.arange(m_count) + 1,
                               indexing="ij")
    parity = np.concatenate([np.ones(p_idx.size, dtype=int),
                             -np.ones(p_idx.size, dtype=int)])
    table = EvapModeTable(
        geom=geom, tau_ev=tau_ev, spectrum=spectrum,
        m_index=np.concatenate([m_idx.ravel(), m_idx.ravel()]),
        p_index=np.concatenate([p_idx.ravel(), p_idx.ravel()]),
        parity=parity,
        tau=np.concatenate([tau_plus.ravel(), tau_minus.ravel()]),
        weight=np.concatenate([w_p.ravel(), w_m.ravel()]),
        weight_err=np.abs(np.concatenate([(w_p2 - w_p).ravel(),
                                          (w_m2 - w_m).ravel()])),
        mass_weight=np.concatenate([mw_p.ravel(), mw_m.ravel()]),
        truncation=(m_count, p_count),
    )
    return table


def g_evaporating(t, table: EvapModeTable):
    """Correlation Σ w·exp(−t̃/τ) over the retained modes."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("scaled time must be non-negative")
    out = np.exp(-t[..., None] / table.tau) @ table.weight
    return out if out.ndim else float(out)


def evaporating_series(geom, tau_ev, times, table=None) -> CorrelationSeries:
    table = table or build_mode_table(geom, tau_ev)
    times = np.asarray(times, dtype=float)
    decay = np.exp(-times[:, None] / table.tau)
    vals = decay @ table.weight
    errs = decay @ table.weight_err
    meta = {"R": geom.radius, "L": geom.height, "d": geom.depth,
            "tau_ev": tau_ev}
    return CorrelationSeries("evaporating", times, vals, errs, meta)


def survival_fraction(t, table: EvapModeTable):
    """Fraction of not-yet-evaporated particles from the mass weights."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-t[..., None] / table.tau) @ table.mass_weight
    return out if out.ndim else float(out)


def evaluate_propagator(rho, phi, z, t, rho0, phi0, z0,
                        table: EvapModeTable):
    """n = 0 truncated propagator density at (ρ, φ, z) from (ρ₀, φ₀, z₀).

    The retained sector is axially symmetric: the value depends on φ − φ₀
    only through the omitted n ≠ 0 terms, i.e. not at all.
    """
    geom, sp = table.geom, table.spectrum
    if t <= 0:
        raise ValueError("propagator evaluation requires t̃ > 0")
    for rr, zz in ((rho, z), (rho0, z0)):
        if not (0 <= rr <= geom.radius and geom.depth <= zz <= geom.depth + geom.height):
            raise ValueError("point outside the cylinder")
    if t < 3.0 * table.tau_fastest:
        warnings.warn(
            "requested time is comparable to the fastest retained mode; "
            "omitted modes may matter", RuntimeWarning)

    from scipy.special import j0 as _j0
    radius, length, depth = geom.radius, geom.height, geom.depth
    xi = sp.beta * radius
    norm_p = (2.0 / geom.volume * xi ** 2
              / (((sp.eta0 * radius) ** 2 + xi ** 2) * _j0(xi) ** 2))
    radial = norm_p * _j0(sp.beta * rho) * _j0(sp.beta * rho0)  # (P,)

    zc, zc0 = z - depth - length / 2.0, z0 - depth - length / 2.0
    ax_plus = (np.cos(sp.eta_plus * zc) * np.cos(sp.eta_plus * zc0)
               / (1.0 + _sinc(sp.eta_plus * length)))
    ax_minus = (np.sin(sp.eta_minus * zc) * np.sin(sp.eta_minus * zc0)
                / (1.0 - _sinc(sp.eta_minus * length)))

    d2 = geom.depth ** 2
    dec_plus = np.exp(-t * d2 * (sp.beta[:, None] ** 2 + sp.eta_plus[None, :] ** 2))
    dec_minus = np.exp(-t * d2 * (sp.beta[:, None] ** 2 + sp.eta_minus[None, :] ** 2))
    val = radial @ dec_plus @ ax_plus + radial @ dec_minus @ ax_minus
    return float(val)


def tau_dominant_approx(geom: CylinderGeometry, tau_ev: float) -> float:
    """Closed-form estimate of the slowest decay time, (τ_ev/d)·(V/S)."""
    if tau_ev <= 0:
        raise ValueError("tau_ev must be positive")
    return tau_ev * geom.volume / (geom.surface * geom.depth)


def mode_dominance(geom: CylinderGeometry, tau_ev: float):
    """Relative gap between the slowest mode and its runner-up.

    Returns (gap, label) with label 'radial' for the (m=1+, p=1) runner-up
    (wide cylinders) or 'odd-axial' for (m=1-, p=0) (tall cylinders).
    """
    eta_plus, eta_minus = solve_eta(geom, tau_ev, 1)
    beta = solve_beta(geom, tau_ev, 2)
    d2 = geom.depth ** 2
    tau00 = 1.0 / (d2 * (beta[0] ** 2 + eta_plus[0] ** 2))
    tau_radial = 1.0 / (d2 * (beta[1] ** 2 + eta_plus[0] ** 2))
    tau_odd = 1.0 / (d2 * (beta[0] ** 2 + eta_minus[0] ** 2))
    if tau_radial >= tau_odd:
        runner, label = tau_radial, "radial"
    else:
        runner, label = tau_odd, "odd-axial"
    return (tau00 - runner) / tau00, label


@dataclass(frozen=True)
class SimpleModelParams:
    """Two-regime composite model parameters (all in T_D units)."""

    b_rms_sq: float
    tau_v: float
    plateau: float
    tau_ev_eff: float

    def __post_init__(self):
        if min(self.b_rms_sq, self.tau_v, self.plateau, self.tau_ev_eff) <= 0:
            raise ValueError("simple-model parameters must be positive")


def g_simple_model(t, params: SimpleModelParams):
    """Free-diffusion decay gated at τ_V plus an exponentially decaying plateau."""
    t = np.asarray(t, dtype=float)
    out = (params.b_rms_sq * g_free(t) * np.exp(-2.0 * t / params.tau_v)
           + params.plateau * np.exp(-t / params.tau_ev_eff))
    return out if out.ndim else float(out)
