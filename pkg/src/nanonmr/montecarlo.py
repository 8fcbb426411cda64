"""Stochastic oracle: random-walk simulation of the confined correlation.

Particles take independent Gaussian steps of standard deviation √(2DΔt) per
Cartesian axis inside the cylinder. Wall models: reflective (specular),
sticky (frozen at first contact, frozen field value keeps contributing) and
evaporating (absorbed at contact with probability p_abs = (d/τ_ev)√(πΔt/D),
the first-order discretization of the radiation boundary; contributes 0
afterwards). A free-space mode with no walls validates the unconfined curve.

All simulation happens in units with d = 1 and D = 1 (times in T_D); the
driver rescales geometry on the way in and the correlation amplitude (∝ d⁻³)
on the way out. Each realization owns a seed drawn from a SeedSequence, so
results are independent of the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import CylinderGeometry
from .series import CorrelationSeries
from .sticky import plateau_ideal
from .estimation import volume_time

_MODEL_CODES = {"reflective": 0, "sticky": 1, "evaporating": 2, "free": 3}


@dataclass(frozen=True)
class MCConfig:
    particles: int
    realizations: int
    dt: float
    times: np.ndarray
    model: str
    seed: int = 0
    tau_ev: float | None = None
    threads: int | None = None
    capture_positions: bool = False

    def __post_init__(self):
        if self.model not in _MODEL_CODES:
            raise ValueError(f"unknown wall model {self.model!r}")
        if self.particles <= 0 or self.realizations <= 0:
            raise ValueError("particle and realization counts must be positive")
        if self.dt <= 0:
            raise ValueError("time step must be positive")
        if self.model == "evaporating" and not (self.tau_ev and self.tau_ev > 0):
            raise ValueError("evaporating model requires positive tau_ev")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if self.times.size == 0 or np.any(np.diff(self.times) <= 0) \
                or self.times[0] <= 0:
            raise ValueError("output times must be positive and increasing")


@dataclass(frozen=True)
class MCResult:
    correlation: CorrelationSeries
    survival_times: np.ndarray
    survival: np.ndarray
    survival_err: np.ndarray
    config: MCConfig
    positions: np.ndarray | None = None


@njit(cache=True, nogil=True, inline="always")
def _field(x, y, z):
    r2 = x * x + y * y + z * z
    r = math.sqrt(r2)
    return (3.0 * z * z - r2) / (r2 * r2 * r)


@njit(cache=True, nogil=True)
def _run_realization(seed, n, radius, length, dt, steps_per_out, model,
                     p_abs, capture):
    """One realization; returns (corr sums, alive counts, f0 sum sq, positions).

    Geometry is normalized: probe at origin, sample occupies z in [1, 1+length],
    rho <= radius. model: 0 reflective, 1 sticky, 2 evaporating, 3 free.
    """
    np.random.seed(seed)
    zlo, zhi = 1.0, 1.0 + length
    r2max = radius * radius
    sig = math.sqrt(2.0 * dt)

    x = np.empty(n)
    y = np.empty(n)
    z = np.empty(n)
    f0 = np.empty(n)
    status = np.zeros(n, dtype=np.int8)  # 0 bulk, 1 stuck, 2 evaporated
    for i in range(n):
        rr = radius * math.sqrt(np.random.random())
        phi = 2.0 * math.pi * np.random.random()
        x[i] = rr * math.cos(phi)
        y[i] = rr * math.sin(phi)
        z[i] = zlo + length * np.random.random()
        f0[i] = _field(x[i], y[i], z[i])

    n_out = steps_per_out.shape[0]
    corr = np.zeros(n_out)
    alive = np.zeros(n_out, dtype=np.int64)
    pos = np.zeros((n, 3)) if capture else np.zeros((1, 3))

    for k in range(n_out):
        for _ in range(steps_per_out[k]):
            for i in range(n):
                if status[i] != 0:
                    continue
                xn = x[i] + sig * np.random.standard_normal()
                yn = y[i] + sig * np.random.standard_normal()
                zn = z[i] + sig * np.random.standard_normal()
                if model != 3:
                    hit = False
                    if zn < zlo:
                        hit = True
                        zn = 2.0 * zlo - zn
                    elif zn > zhi:
                        hit = True
                        zn = 2.0 * zhi - zn
                    rr2 = xn * xn + yn * yn
                    hit_side = rr2 > r2max
                    if hit_side:
                        hit = True
                        rr = math.sqrt(rr2)
                        fold = (2.0 * radius - rr) / rr
                        xn *= fold
                        yn *= fold
                    if hit:
                        if model == 1:
                            # freeze at the (folded) contact point
                            if zn < zlo:
                                zn = zlo
                            elif zn > zhi:
                                zn = zhi
                            if hit_side:
                                rr2 = xn * xn + yn * yn
                                rr = math.sqrt(rr2)
                                xn *= radius / rr
                                yn *= radius / rr
                            status[i] = 1
                        elif model == 2:
                            if np.random.random() < p_abs:
                                status[i] = 2
                x[i] = xn
                y[i] = yn
                z[i] = zn
        # stuck particles keep their frozen position, so the field is only
        # needed at the output times
        c = 0.0
        na = 0
        for i in range(n):
            if status[i] == 2:
                continue
            c += _field(x[i], y[i], z[i]) * f0[i]
            if status[i] == 0:
                na += 1
        corr[k] = c
        alive[k] = na
        if capture and k == n_out - 1:
            for i in range(n):
                pos[i, 0] = x[i]
                pos[i, 1] = y[i]
                pos[i, 2] = z[i]
    return corr, alive, pos


def _bootstrap_err(per_real, n_boot=400, seed=12345):
    """Bootstrap standard error of the mean over realizations (columns kept)."""
    rng = np.random.default_rng(seed)
    n = per_real.shape[0]
    idx = rng.integers(0, n, size=(n_boot, n))
    boots = per_real[idx].mean(axis=1)
    err = boots.std(axis=0, ddof=1)
    floor = 1e-12 * np.maximum(np.abs(per_real).max(axis=0), 1e-30)
    return np.maximum(err, floor)


def simulate_correlation(config: MCConfig, geom: CylinderGeometry) -> MCResult:
    """Empirical correlation V·⟨f(r_t)f(r_0)⟩ and survival fraction."""
    if config.model != "free":
        tau_v = volume_time(plateau_ideal(geom))
        if config.dt > 1e-3 * min(1.0, tau_v):
            raise ValueError(
                f"time step {config.dt:g} too coarse; need <= "
                f"{1e-3 * min(1.0, tau_v):g}")

    d = geom.depth
    radius, length = geom.radius / d, geom.height / d
    times = config.times  # already T_D units
    steps = np.diff(np.concatenate(([0.0], times))) / config.dt
    steps_per_out = np.round(steps).astype(np.int64)
    if np.any(steps_per_out < 1):
        raise ValueError("output grid finer than the time step")
    actual_times = np.cumsum(steps_per_out) * config.dt

    p_abs = 0.0
    if config.model == "evaporating":
        p_abs = (1.0 / config.tau_ev) * math.sqrt(math.pi * config.dt)
        if p_abs > 1.0:
            raise ValueError("absorption probability exceeds 1; reduce dt")
    code = _MODEL_CODES[config.model]

    seeds = np.random.SeedSequence(config.seed).generate_state(
        config.realizations, dtype=np.uint32)

    def one(seed):
        return _run_realization(int(seed), config.particles, radius, length,
                                config.dt, steps_per_out, code, p_abs,
                                config.capture_positions)

    n_threads = config.threads or min(os.cpu_count() or 1, 16)
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        results = list(pool.map(one, seeds))

    vol = math.pi * radius ** 2 * length
    corr = np.stack([r[0] for r in results]) * (vol / config.particles) / d ** 3
    alive = np.stack([r[1] for r in results]) / config.particles
    positions = (np.concatenate([r[2] for r in results]) * d
                 if config.capture_positions else None)

    meta = {"R": geom.radius, "L": geom.height, "d": geom.depth,
            "tau_ev": config.tau_ev, "seed": config.seed,
            "particles": config.particles, "realizations": config.realizations,
            "dt": config.dt, "wall_model": config.model}
    series = CorrelationSeries("monte-carlo", actual_times, corr.mean(axis=0),
                               _bootstrap_err(corr), meta)
    return MCResult(correlation=series, survival_times=actual_times,
                    survival=alive.mean(axis=0),
                    survival_err=_bootstrap_err(alive),
                    config=config, positions=positions)
