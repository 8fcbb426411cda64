"""Shared numerical kernels.

Panelized Gauss-Legendre quadrature with an a-posteriori error estimate,
bracketed root scanning for transcendental eigenvalue conditions, and thin
wrappers around the scaled special functions used throughout the library.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special
from scipy.optimize import brentq


class AccuracyError(RuntimeError):
    """Quadrature failed to converge; carries the best available value."""

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class ScanError(RuntimeError):
    """Root scan could not bracket the expected roots."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Per-axis Gauss-Legendre rule: `panels` equal panels of `nodes` points.

    The error estimate compares against a rule with `nodes + node_increment`
    points per panel; the grid is refined (panels doubled) up to
    `max_refinements` times until the estimate drops below
    max(rel_tol * |value|, abs_floor).
    """

    nodes: int = 24
    panels: int = 2
    rel_tol: float = 1e-6
    abs_floor: float = 1e-13
    node_increment: int = 8
    max_refinements: int = 3

    def __post_init__(self):
        if self.nodes < 2 or self.panels < 1:
            raise ValueError("need at least 2 nodes and 1 panel per axis")
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError("rel_tol must lie in (0, 1)")


@dataclass(frozen=True)
class RootScanSpec:
    """Bracketed scan of [lo, hi] with sampling resolution `step`."""

    lo: float
    hi: float
    step: float
    rel_tol: float = 1e-13
    max_roots: int = 512

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError("empty scan interval")
        if self.step <= 0:
            raise ValueError("step must be positive")


@lru_cache(maxsize=128)
def _leggauss_cached(n: int):
    return leggauss(n)


def panel_rule(a: float, b: float, panels: int, nodes: int):
    """Composite Gauss-Legendre nodes/weights on [a, b] with equal panels."""
    x, w = _leggauss_cached(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2.0
    mids = (edges[:-1] + edges[1:]) / 2.0
    xs = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return xs, ws


def graded_rule(edges: np.ndarray, nodes: int):
    """Gauss-Legendre rule on panels with explicitly supplied edges."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss_cached(nodes)
    half = np.diff(edges) / 2.0
    mids = (edges[:-1] + edges[1:]) / 2.0
    xs = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return xs, ws


def _tensor_eval(f, bounds, panels, nodes):
    rules = [panel_rule(a, b, panels, nodes) for (a, b) in bounds]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    vals = np.asarray(f(*grids), dtype=float)
    for r in reversed(rules):
        vals = vals @ r[1]
    return float(vals)


def integrate_nd(f, bounds, spec: QuadratureSpec | None = None):
    """Tensor-product quadrature of a vectorized integrand over a box.

    f must accept len(bounds) broadcastable arrays and return an array of the
    same shape. Returns (value, error_estimate). Raises AccuracyError when the
    estimate stays above tolerance after the allowed refinements; the exception
    carries the best value so callers can decide whether to fall back.
    """
    spec = spec or QuadratureSpec()
    bounds = [(float(a), float(b)) for (a, b) in bounds]
    for a, b in bounds:
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"invalid integration bounds ({a}, {b})")
    panels = spec.panels
    value = err = np.nan
    for _ in range(spec.max_refinements + 1):
        coarse = _tensor_eval(f, bounds, panels, spec.nodes)
        fine = _tensor_eval(f, bounds, panels, spec.nodes + spec.node_increment)
        value, err = fine, abs(fine - coarse)
        if err <= max(spec.rel_tol * abs(value), spec.abs_floor):
            return value, err
        panels *= 2
    raise AccuracyError(
        f"quadrature did not converge (estimate {err:.3e} vs value {value:.3e})",
        value=value,
        error=err,
    )


def scan_roots(f, spec: RootScanSpec, poles=()):
    """All simple roots of f on [lo, hi], found by bracketing + brentq.

    `poles` lists points where f diverges or is discontinuous; the scan
    interval is split there so sign changes across a pole are not mistaken
    for roots. The sampling step must be finer than the root spacing.
    """
    cuts = sorted(p for p in poles if spec.lo < p < spec.hi)
    eps = 1e-9 * max(abs(spec.lo), abs(spec.hi), 1.0)
    segments = []
    left = spec.lo
    for p in cuts:
        if p - eps > left:
            segments.append((left, p - eps))
        left = p + eps
    if left < spec.hi:
        segments.append((left, spec.hi))

    roots = []
    for a, b in segments:
        n = max(int(np.ceil((b - a) / spec.step)), 2)
        xs = np.linspace(a, b, n + 1)
        ys = np.asarray([f(x) for x in xs], dtype=float)
        sign = np.sign(ys)
        for i in range(n):
            if ys[i] == 0.0:
                roots.append(xs[i])
            elif sign[i] * sign[i + 1] < 0:
                r = brentq(f, xs[i], xs[i + 1], xtol=1e-300,
                           rtol=max(spec.rel_tol, 4e-16))
                roots.append(r)
        if ys[-1] == 0.0:
            roots.append(xs[-1])

    roots = np.array(sorted(roots))
    if roots.size > 1:
        keep = np.concatenate(([True], np.diff(roots) > spec.step * 1e-6))
        roots = roots[keep]
    if roots.size > spec.max_roots:
        warnings.warn(
            f"root scan truncated to the first {spec.max_roots} of "
            f"{roots.size} roots", RuntimeWarning)
        roots = roots[: spec.max_roots]
    return roots


def bessel_i0e(x):
    """Exponentially scaled modified Bessel function I0(x)·exp(-|x|)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_i0e expects non-negative arguments")
    return special.i0e(x)


def bessel_j(n: int, x):
    """Bessel function of the first kind and its derivative, orders 0 or 1."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return special.j0(x), -special.j1(x)
    if n == 1:
        j1 = special.j1(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(x != 0.0, special.j0(x) - j1 / np.where(x != 0, x, 1.0), 0.5)
        return j1, d
    raise ValueError("only orders 0 and 1 are needed here")


def erfcx(x):
    """Scaled complementary error function exp(x²)·erfc(x)."""
    return special.erfcx(np.asarray(x, dtype=float))
