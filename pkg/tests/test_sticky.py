import math

import numpy as np
import pytest

from nanonmr.freediff import g_free
from nanonmr.geometry import kernel_volume_integral, make_geometry
from nanonmr.sticky import (bulk_density, equal_time_amplitude, g_sticky,
                            g_sticky_bulk, optimal_geometry, plateau_ideal,
                            plateau_ratio, plateau_sticky, sticky_series)


def test_plateau_ideal_closed_form():
    g = make_geometry(5.0, 5.0, 1.0)
    bulk = kernel_volume_integral(g)
    assert np.isclose(plateau_ideal(g),
                      4.0 * math.pi ** 2 / g.volume * bulk ** 2, rtol=1e-14)


def test_plateau_ratio_identity():
    # ratio · plateau_ideal ≡ plateau_sticky for random geometries
    rng = np.random.default_rng(3)
    for _ in range(20):
        r, length, d = rng.uniform(0.3, 20.0, size=3)
        g = make_geometry(r, length, d)
        assert np.isclose(plateau_ratio(g) * plateau_ideal(g),
                          plateau_sticky(g), rtol=1e-10)


def test_plateau_ratio_half_limit_in_tall_thin_ordering():
    # the ratio approaches 1/2 for L >> R >> d (correction ~ d/R)
    assert abs(plateau_ratio(make_geometry(100.0, 1e5, 1.0)) - 0.5) < 0.02
    # by contrast the equal-aspect diagonal settles at sqrt(2)/4
    assert abs(plateau_ratio(make_geometry(400.0, 400.0, 1.0))
               - math.sqrt(2.0) / 4.0) < 0.02


def test_plateau_scale_invariance():
    # the ratio depends only on the aspect R/d, L/d
    g1 = make_geometry(3.0, 4.0, 1.0)
    g2 = make_geometry(6.0, 8.0, 2.0)
    assert np.isclose(plateau_ratio(g1), plateau_ratio(g2), rtol=1e-12)


def test_equal_time_amplitude_half_space_limit():
    amp = equal_time_amplitude(make_geometry(40.0, 40.0, 1.0))
    assert abs(amp - math.pi / 4.0) < 0.01 * math.pi / 4.0


def test_g_sticky_zero_time_amplitude():
    g = make_geometry(5.0, 5.0, 1.0)
    assert g_sticky(0.0, g) == equal_time_amplitude(g)
    # continuity as t -> 0
    assert abs(g_sticky(1e-4, g) / equal_time_amplitude(g) - 1.0) < 0.02


def test_composition_identity():
    g = make_geometry(3.0, 3.0, 1.0)
    for t in (0.1, 1.0, 10.0):
        lhs = g_sticky(t, g)
        rhs = (g_sticky_bulk(t, g)
               + plateau_sticky(g) * (1.0 - bulk_density(t, g)))
        assert np.isclose(lhs, rhs, rtol=1e-12)


def test_bulk_density_monotone_and_bounded():
    g = make_geometry(2.0, 2.0, 1.0)
    zeta = [bulk_density(t, g) for t in (0.05, 0.2, 1.0, 5.0)]
    assert all(0.0 <= z <= 1.0 for z in zeta)
    assert all(a > b for a, b in zip(zeta, zeta[1:]))


def test_long_time_plateau():
    g = make_geometry(2.0, 2.0, 1.0)
    assert abs(g_sticky(1e3, g) / plateau_sticky(g) - 1.0) < 1e-3


def test_early_time_matches_unconfined_curve():
    # large sample: bulk decay indistinguishable from free diffusion
    g = make_geometry(10.0, 10.0, 1.0)
    amp = equal_time_amplitude(g)
    for t in (0.02, 0.1, 0.5):
        assert abs(g_sticky(t, g) / (amp * g_free(t)) - 1.0) < 0.02


def test_sticky_series_contents():
    g = make_geometry(3.0, 3.0, 1.0)
    times = np.geomspace(0.05, 50.0, 10)
    s = sticky_series(g, times)
    assert s.model == "sticky"
    assert np.allclose(s.times, times)
    assert np.all(s.errors >= 0)
    assert np.isclose(s.values[0], g_sticky(times[0], g), rtol=1e-12)
    assert s.meta["R"] == 3.0


def test_input_validation():
    g = make_geometry(2.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        g_sticky(-0.1, g)
    with pytest.raises(ValueError):
        g_sticky_bulk(0.0, g)
    with pytest.raises(ValueError):
        bulk_density(0.0, g)
    with pytest.raises(ValueError):
        optimal_geometry("evaporating")
    with pytest.raises(ValueError):
        optimal_geometry("sticky", d=-1.0)
