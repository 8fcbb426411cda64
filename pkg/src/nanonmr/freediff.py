"""Free (unconfined) diffusion correlation function.

g_free is normalized to 1 at t = 0; multiply by the mean-squared field
amplitude of the sample to obtain a physical correlation. Times are in units
of the diffusion time T_D = d²/D.
"""

from __future__ import annotations

import math

import numpy as np

from .numerics import erfcx

# Below this scaled time the closed form loses digits to cancellation between
# the erfcx term and the polynomial tail, so a matched short-time series is
# used instead. The three-term series error at the switch is ~2e-9.
SERIES_SWITCH = 1e-4

_SQRT_PI = math.sqrt(math.pi)


def _closed_form(t):
    rt = np.sqrt(t)
    poly = (-(t ** -1.5) + 1.5 * t ** 1.5 + 1.0 / rt - 1.75 * rt)
    tail = t ** -1.5 - 1.5 / rt - 1.5 * _SQRT_PI * t + 3.0 * rt + _SQRT_PI / 4.0
    bracket = poly * _SQRT_PI / rt * erfcx(1.0 / rt) + tail
    return 4.0 / _SQRT_PI * bracket


def _short_series(t):
    # 1 - 6 t + (20/√π) t^(3/2) + O(t^(5/2))
    return 1.0 - 6.0 * t + (20.0 / _SQRT_PI) * t ** 1.5


def g_free(t):
    """Normalized free-diffusion correlation at scaled time(s) t = t_phys/T_D."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("scaled time must be non-negative")
    out = np.empty_like(t)
    small = t <= SERIES_SWITCH
    out[small] = _short_series(t[small])
    if np.any(~small):
        out[~small] = _closed_form(t[~small])
    return out if out.ndim else float(out)


def g_free_long_asymptote(t):
    """Long-time power law (32/15√π)·t^(-3/2) of the free correlation."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("asymptote undefined at t = 0")
    out = (32.0 / (15.0 * _SQRT_PI)) * t ** -1.5
    return out if out.ndim else float(out)
