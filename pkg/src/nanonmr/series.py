"""Correlation series container shared by the analytic and Monte Carlo paths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODEL_TAGS = ("reflective", "sticky", "evaporating", "free", "monte-carlo", "fitted")


@dataclass
class CorrelationSeries:
    """An ordered sampled correlation curve G(t̃) with per-point error estimates.

    Times are in units of T_D. `meta` records the geometry/fluid snapshot
    (R, L, d, tau_ev, seed, ...) used to generate the curve.
    """

    model: str
    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {self.model!r}")
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if not (self.times.shape == self.values.shape == self.errors.shape):
            raise ValueError("times, values and errors must have equal shapes")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("correlation values must be finite")
        if np.any(self.errors < 0):
            raise ValueError("error estimates must be non-negative")

    def __len__(self):
        return self.times.size

    def interpolate(self, t):
        """Log-time linear interpolation of G onto new times."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise ValueError("interpolation times outside the sampled range")
        return np.interp(np.log(t), np.log(self.times), self.values)


def log_time_grid(t_min: float, t_max: float, points_per_decade: int = 40):
    """Logarithmic time grid matching the library's default sampling."""
    if not (0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    n = max(int(round(np.log10(t_max / t_min) * points_per_decade)) + 1, 2)
    return np.geomspace(t_min, t_max, n)
