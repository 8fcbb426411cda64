import math

import numpy as np
import pytest

from nanonmr.evaporating import (SimpleModelParams, build_mode_table,
                                 evaluate_propagator, evaporating_series,
                                 g_evaporating, g_simple_model, mode_dominance,
                                 solve_beta, solve_eta, survival_fraction,
                                 tau_dominant_approx)
from nanonmr.freediff import g_free
from nanonmr.geometry import make_geometry
from nanonmr.numerics import bessel_j, panel_rule
from nanonmr.sticky import equal_time_amplitude, plateau_ideal

GEOM = make_geometry(5.0, 5.0, 1.0)


def test_axial_roots_satisfy_conditions():
    eta0 = 1.0 / 10.0  # tau_ev = 10, d = 1
    plus, minus = solve_eta(GEOM, 10.0, 6)
    length = GEOM.height
    for eta in plus:
        assert abs(math.tan(eta * length / 2) - eta0 / eta) < 1e-9
    for eta in minus:
        assert abs(math.tan(eta * length / 2) + eta / eta0) < 1e-6 * (1 + eta / eta0)
    # interlacing: one root per tan branch
    poles = np.array([(2 * j + 1) * math.pi / length for j in range(7)])
    assert np.all(plus < poles[:6])
    assert np.all(plus[1:] > poles[:5])
    assert np.all((minus > poles[:6]) & (minus < poles[1:7]))


def test_radial_roots_satisfy_condition():
    beta = solve_beta(GEOM, 10.0, 6)
    eta0r = GEOM.radius / 10.0
    for b in beta:
        xi = b * GEOM.radius
        j0, dj0 = bessel_j(0, xi)
        assert abs(xi * dj0 + eta0r * j0) < 1e-9
    assert np.all(np.diff(beta) > 0)


def test_reflective_limit_roots():
    # tau_ev -> inf: even axial roots approach 2πj/L, radial roots the J1 zeros
    plus, _ = solve_eta(GEOM, 1e12, 4)
    expected = 2.0 * math.pi * np.arange(1, 5) / GEOM.height
    # lowest even root tends to sqrt(2 eta0 / L) ≈ 0
    assert plus[0] < 1e-5
    assert np.allclose(plus[1:], expected[:3], rtol=1e-6)


def test_reflective_limit_weights():
    table = build_mode_table(GEOM, 1e9, 40, 40)
    # slowest mode carries the reflective plateau
    slow = np.argmax(table.tau)
    assert np.isclose(table.weight[slow], plateau_ideal(GEOM), rtol=1e-6)
    # completeness: total weight is the equal-time variance
    assert np.isclose(table.weight.sum(), equal_time_amplitude(GEOM),
                      rtol=1e-4)
    # and all particles survive
    assert np.isclose(table.mass_weight.sum(), 1.0, rtol=1e-6)


def test_correlation_monotone_and_positive_start():
    table = build_mode_table(GEOM, 100.0)
    t = np.geomspace(1e-2, 1e4, 60)
    g = g_evaporating(t, table)
    assert g_evaporating(0.0, table) == pytest.approx(table.weight.sum())
    assert np.all(np.diff(g) < 0)


def test_survival_fraction_limits():
    table = build_mode_table(GEOM, 100.0)
    assert abs(survival_fraction(1e-6, table) - 1.0) < 1e-3
    t = np.geomspace(0.1, 1e4, 40)
    s = survival_fraction(t, table)
    assert np.all(np.diff(s) < 0)
    assert s[-1] < 0.05


def test_series_matches_pointwise_evaluation():
    times = np.geomspace(0.1, 100.0, 12)
    table = build_mode_table(GEOM, 50.0)
    series = evaporating_series(GEOM, 50.0, times, table)
    assert np.allclose(series.values, g_evaporating(times, table), rtol=1e-14)
    assert np.all(series.errors >= 0)
    assert series.meta["tau_ev"] == 50.0


def test_tau_dominant_approximation():
    # small eta0 L, eta0 R: closed-form estimate matches the exact tau_00
    table = build_mode_table(GEOM, 1e3)
    assert np.isclose(table.tau_slowest, tau_dominant_approx(GEOM, 1e3),
                      rtol=0.01)


def test_mode_dominance_flip():
    gap_wide, label_wide = mode_dominance(make_geometry(4.0, 2.0, 1.0), 1e3)
    gap_tall, label_tall = mode_dominance(make_geometry(2.0, 4.0, 1.0), 1e3)
    assert label_wide == "radial"
    assert label_tall == "odd-axial"
    assert 0.0 < gap_wide < 1.0 and 0.0 < gap_tall < 1.0


def test_propagator_normalization_and_symmetry():
    table = build_mode_table(GEOM, 100.0, 20, 20)
    t = 2.0
    p1 = evaluate_propagator(1.0, 0.0, 3.0, t, 2.0, 1.0, 4.0, table)
    p2 = evaluate_propagator(2.0, 0.3, 4.0, t, 1.0, 0.0, 3.0, table)
    assert np.isclose(p1, p2, rtol=1e-12)  # symmetric kernel, phi-independent
    # integrating over the final position returns the survival density
    rho, wr = panel_rule(0.0, GEOM.radius, 8, 12)
    z, wz = panel_rule(GEOM.depth, GEOM.depth + GEOM.height, 8, 12)
    vals = np.array([[evaluate_propagator(r, 0.0, zz, t, 2.0, 0.0, 3.5, table)
                      for zz in z] for r in rho])
    mass = 2.0 * math.pi * float((wr * rho) @ vals @ wz)
    assert 0.0 < mass <= 1.0 + 1e-6


def test_propagator_validation():
    table = build_mode_table(GEOM, 100.0, 10, 10)
    with pytest.raises(ValueError):
        evaluate_propagator(1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 3.0, table)
    with pytest.raises(ValueError):
        evaluate_propagator(99.0, 0.0, 3.0, 1.0, 1.0, 0.0, 3.0, table)
    with pytest.warns(RuntimeWarning):
        evaluate_propagator(1.0, 0.0, 3.0, 1e-9, 1.0, 0.0, 3.0, table)


def test_simple_model_shape_and_validation():
    with pytest.raises(ValueError):
        SimpleModelParams(1.0, -1.0, 0.1, 10.0)
    params = SimpleModelParams(0.75, 11.0, 0.02, 1000.0)
    assert np.isclose(g_simple_model(0.0, params), 0.75 + 0.02)
    t = np.geomspace(1e-3, 1e4, 50)
    g = g_simple_model(t, params)
    assert np.all(np.diff(g) < 0)
    # early times follow the gated free decay
    assert np.isclose(g_simple_model(0.01, params),
                      0.75 * g_free(0.01) * math.exp(-0.02 / 11.0) + 0.02
                      * math.exp(-0.01 / 1000.0), rtol=1e-12)


def test_invalid_tau_ev():
    with pytest.raises(ValueError):
        build_mode_table(GEOM, -1.0)
    with pytest.raises(ValueError):
        tau_dominant_approx(GEOM, 0.0)
