"""Tests for the inverted-equation construction, energy, and classification.

Expected numbers were frozen from quadrature cross-checks and window studies;
each carries the tolerance that study justified.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssheat import (
    AsymptoticMode,
    ProblemParams,
    Regime,
    RegimeMismatch,
    WindowTooShort,
    G_potential,
    classify_asymptotics,
    count_zeros_inverted,
    derive_constants,
    energy_H,
    envelope_zero_census,
    g_nonlinearity,
    invert_duality,
    riccati_monitors,
    shoot_profile,
    solve_inverted,
)

P31 = ProblemParams(n=3, alpha=1.0)
P32 = ProblemParams(n=3, alpha=2.0)
P33 = ProblemParams(n=3, alpha=3.0)
P41 = ProblemParams(n=4, alpha=1.0)
P21 = ProblemParams(n=2, alpha=1.0)
P11 = ProblemParams(n=1, alpha=1.0)


def test_g_vanishes_where_it_should():
    assert g_nonlinearity(0.0, P33) == 0.0
    xstar = (2.0 / 9.0) ** (1.0 / 3.0)
    assert abs(g_nonlinearity(xstar, P33)) < 1e-15
    assert abs(g_nonlinearity(-xstar, P33)) < 1e-15
    # beta = -2 at (3,1): no nonzero real root, g is strictly increasing
    assert g_nonlinearity(1.0, P31) == pytest.approx(3.0)


def test_G_prime_is_g():
    h = 1e-6
    for p in (P31, P32, P33):
        for x in np.linspace(-2.5, 2.5, 11):
            fd = (G_potential(x + h, p) - G_potential(x - h, p)) / (2.0 * h)
            assert fd == pytest.approx(float(g_nonlinearity(x, p)), abs=5e-9)


def test_solve_anchoring_and_certificate():
    sol = solve_inverted(3.0, P31)
    # nu = 1/8 with no halvings at (3,1), so the flat point is 1/24
    assert sol.s1 == pytest.approx(1.0 / 24.0, rel=1e-12)
    assert sol.meta["halvings"] == 0
    assert sol.traj.meta["omega"] == pytest.approx(3.8048250679196656, abs=1e-6)
    assert sol.meta["w0_residual"] <= 1e-9
    assert sol.contraction_ratio == sol.meta["picard_ratio"] < 0.5
    assert sol.meta["picard_ratio"] == pytest.approx(0.176, abs=0.05)
    assert sol.meta["sup_window_ratio"] == pytest.approx(1.268, abs=0.05)
    assert len(sol.traj.zeros) == 3
    assert not sol.meta["window_truncated"]


def test_solution_starts_flat_at_mu():
    sol = solve_inverted(2.0, P31)
    spl = sol.traj.spline()
    g_mu = float(g_nonlinearity(2.0, P31))
    # the deep stretch rides the slave flow w = mu + g(mu) s + O(s^2)
    for s in (1e-6, 1e-4, 1e-3):
        assert float(spl(s)) == pytest.approx(2.0 + g_mu * s, abs=1e-4)
    assert float(spl(0.0)) == pytest.approx(2.0, abs=1e-9)
    # zeros all sit beyond the flat anchor
    assert np.all(sol.traj.zeros > sol.s1)


def test_mu_below_one_rejected():
    with pytest.raises(ValueError):
        solve_inverted(0.5, P31)


def test_window_too_short():
    with pytest.raises(WindowTooShort):
        solve_inverted(1.0, P31, s_max=0.1)


def test_energy_starts_at_potential_of_mu():
    sol = solve_inverted(3.0, P31)
    s0 = float(sol.traj.grid[1])
    H0 = float(energy_H(sol, s0))
    assert H0 == pytest.approx(float(G_potential(3.0, P31)), rel=1e-3)


def test_energy_derivative_identity():
    """dH/ds = w'(s)^2 (1 - 4(gamma-1)s), checked by finite differences."""
    sol = solve_inverted(3.0, P31, tol=1e-12)
    dc = derive_constants(P31)
    spl = sol.traj.spline()
    dspl = spl.derivative()
    ss = np.geomspace(0.2, 900.0, 160)
    h = 1e-5 * ss
    dH = (energy_H(sol, ss + h) - energy_H(sol, ss - h)) / (2.0 * h)
    law = dspl(ss) ** 2 * (1.0 - 4.0 * (dc.gamma - 1.0) * ss)
    scale = np.max(np.abs(law)) + 1e-30
    assert np.max(np.abs(dH - law)) / scale < 1e-5


def test_energy_monotone_past_switch():
    sol = solve_inverted(3.0, P31)
    dc = derive_constants(P31)
    s_switch = 1.0 / (4.0 * (dc.gamma - 1.0))
    ss = np.geomspace(1.01 * s_switch, 1e3, 400)
    H = energy_H(sol, ss)
    drops = np.diff(H)
    assert np.all(drops <= 1e-9 * (1.0 + np.abs(H[:-1])))


CLASSIFY_TABLE = [
    # params, mu, mode, slow value, absolute tolerance
    (P31, 2.0, AsymptoticMode.SLOW, 0.23299, 0.010),
    (P31, 3.0, AsymptoticMode.SLOW, -0.51708, 0.015),
    (P31, 5.0, AsymptoticMode.SLOW, -0.78277, 0.17),
    (P32, 1.0, AsymptoticMode.SLOW, 1.0, 0.08),
    (P41, 2.0, AsymptoticMode.SLOW, -4.0, 0.36),
    (P21, 2.0, AsymptoticMode.SLOW, 0.498044, 0.010),
    (P11, 2.0, AsymptoticMode.SLOW, -0.150186, 0.001),
]


@pytest.mark.parametrize("params,mu,mode,value,tol", CLASSIFY_TABLE)
def test_classification_frozen_values(params, mu, mode, value, tol):
    sol = solve_inverted(mu, params)
    cls = classify_asymptotics(sol)
    assert cls.mode == mode
    assert cls.Ltilde.value == pytest.approx(value, abs=tol)
    assert abs(cls.Ltilde.value - value) <= tol
    # reported uncertainty covers the frozen reference too
    assert abs(cls.Ltilde.value - value) <= 3.0 * cls.Ltilde.uncertainty + tol


def test_classification_fast_member():
    # threshold member of the count-3 plateau at (3,1): slow part gone,
    # fast coefficient large with the alternating sign
    sol = solve_inverted(3.6619663, P31, s_max=1e6)
    cls = classify_asymptotics(sol)
    assert cls.mode == AsymptoticMode.FAST
    assert abs(cls.Ltilde.value) <= 3.0 * max(cls.Ltilde.uncertainty, 1e-3)
    assert cls.Ltilde1 is not None
    assert (-1.0) ** 3 * cls.Ltilde1.value > 0
    assert cls.Ltilde1.value == pytest.approx(-63.57, rel=0.05)


def test_classification_trapped_beta_pos():
    xstar = (2.0 / 9.0) ** (1.0 / 3.0)
    # default window: still swinging, honestly undetermined
    cls0 = classify_asymptotics(solve_inverted(1.0, P33))
    assert cls0.mode == AsymptoticMode.UNDETERMINED
    # deep window: energy drops below the barrier, tail is trapped
    sol = solve_inverted(1.0, P33, s_max=1e16)
    cls = classify_asymptotics(sol)
    assert cls.mode == AsymptoticMode.SLOW
    assert cls.diagnostics.get("trapped") is True
    assert cls.Ltilde.value == pytest.approx(xstar, abs=1e-12)
    assert len(sol.traj.zeros) == 12
    h_end = float(energy_H(sol, sol.traj.grid[-1]))
    assert h_end < 0.0
    # parity: 12 zeros, positive tail
    assert (-1.0) ** 12 * cls.Ltilde.value > 0


def test_critical_slow_manifold_certificate():
    sol = solve_inverted(1.0, P32)
    cls = classify_asymptotics(sol)
    assert cls.mode == AsymptoticMode.SLOW
    assert "manifold_c" in cls.diagnostics
    assert cls.diagnostics["manifold_c"] == pytest.approx(-5.0, abs=0.5)
    assert len(sol.traj.zeros) == 2
    zs = sol.traj.zeros
    assert zs[0] == pytest.approx(0.3756, abs=2e-3)
    assert zs[1] == pytest.approx(99.74, rel=2e-3)


def test_riccati_monitors_slow_tail():
    sol = solve_inverted(1.0, P32)
    mon = riccati_monitors(sol)
    s, h1, h2 = mon[:, 0], mon[:, 1], mon[:, 2]
    assert np.all(np.diff(s) > 0)
    np.testing.assert_allclose(h1 - h2, 0.5, rtol=0, atol=1e-14)
    # slow tail: h1 creeps up to 1/alpha (a fast tail would sit near 0)
    assert 0.40 <= h1[-1] <= 0.52
    with pytest.raises(RegimeMismatch):
        riccati_monitors(solve_inverted(2.0, P31))


def test_envelope_census_large_mu():
    sol = solve_inverted(10.0, P31)
    assert "envelope" in sol.meta
    census = envelope_zero_census(sol)
    assert census["count_log10"] > 1.0
    assert census["max_gap"] >= census["min_gap"] > 0.0
    assert count_zeros_inverted(sol) > len(sol.traj.zeros)
    # the cubic regime pumps much harder: the census goes astronomic
    sol33 = solve_inverted(2.0, P33)
    assert "envelope" in sol33.meta
    assert count_zeros_inverted(sol33) > 10 ** 6


def test_sup_window_breakdown_documented():
    """Window sup stays a small multiple of mu only at moderate mu; the
    pumping growth at larger mu is real and is reported, not clipped."""
    small = [solve_inverted(m, P31).meta["sup_window_ratio"] for m in (2.0, 4.0)]
    assert all(r < 3.0 for r in small)
    # growth is already visible at mu = 6 and an order of magnitude by 8
    assert solve_inverted(6.0, P31).meta["sup_window_ratio"] > 3.0
    big = solve_inverted(8.0, P31)
    assert big.meta["sup_window_ratio"] > 10.0 or big.meta["window_truncated"]


def test_duality_roundtrip():
    traj, _ = shoot_profile(2.0, P31)
    dual = invert_duality(traj)
    back = invert_duality(dual)
    spl_f = traj.spline()
    spl_b = back.spline()
    rr = np.geomspace(0.2, 8.0, 40)
    np.testing.assert_allclose(spl_b(rr), spl_f(rr), rtol=0, atol=1e-9)
    # zeros map to r = s^(-1/2) in reverse order
    zs = np.sort(1.0 / np.sqrt(dual.zeros))
    np.testing.assert_allclose(zs, traj.zeros, rtol=1e-9)


def test_duality_limit_matches_plateau():
    # w(0) of the dual equals the plateau limit L(a)
    traj, est = shoot_profile(2.0, P31)
    dual = invert_duality(traj)
    w0 = float(dual.spline()(float(dual.grid[1])))
    assert w0 == pytest.approx(est.value, abs=2e-4)
    assert est.value == pytest.approx(-0.31705813846039066, abs=5e-6)


@settings(max_examples=6, deadline=None)
@given(mu=st.floats(1.5, 4.0))
def test_construction_invariants_random_mu(mu):
    sol = solve_inverted(mu, P31)
    assert sol.meta["w0_residual"] <= 1e-8
    assert sol.meta["picard_ratio"] < 0.5
    assert sol.meta["sup_window_ratio"] >= 1.0 - 1e-12
    zs = sol.traj.zeros
    assert np.all(np.diff(zs) > 0)
    assert np.all(zs > sol.s1)


@pytest.mark.parametrize("params,mu", [(P31, 2.0), (P31, 3.0), (P31, 5.0),
                                       (P32, 1.0), (P11, 2.0)])
def test_parity_of_tail_sign(params, mu):
    from ssheat.branches import _settled_count
    n, _, cls = _settled_count(mu, params)
    dom = cls.Ltilde if cls.mode == AsymptoticMode.SLOW else cls.Ltilde1
    assert math.copysign(1.0, dom.value) == (-1.0) ** n
