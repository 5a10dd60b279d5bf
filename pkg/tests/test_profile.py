import math

import numpy as np
import pytest

from ssheat import (
    ProblemParams,
    RegimeMismatch,
    Variable,
    WindowTooShort,
    count_zeros_odd,
    count_zeros_profile,
    derive_constants,
    estimate_L,
    estimate_L1_odd,
    integrate_odd_profile,
    integrate_profile,
    profile_rhs,
    shoot_odd_profile,
    shoot_profile,
)

from oracles import rk4_profile, singular_profile_second_derivative

P31 = ProblemParams(n=3, alpha=1.0)
P32 = ProblemParams(n=3, alpha=2.0)


def test_rhs_equilibrium_is_zero():
    assert profile_rhs(1.0, 0.0, 0.0, P31) == 0.0


def test_rhs_axis_value():
    # On the axis the angular term is resolved by symmetry: f'' = -force/N.
    for a in (0.5, 1.0, -2.0, 3.7):
        fpp = profile_rhs(0.0, a, 0.0, P32)
        force = a / 2.0 + abs(a) ** 2.0 * a
        assert fpp == pytest.approx(-force / 3.0, rel=1e-15)


def test_rhs_axis_requires_symmetric_start():
    with pytest.raises(ValueError):
        profile_rhs(0.0, 1.0, 0.5, P31)


def test_singular_stationary_profile_residual():
    # beta^(1/alpha) r^(-2/alpha) solves the profile equation exactly when
    # beta > 0; feed it through the RHS and compare with the analytic second
    # derivative.
    params = ProblemParams(n=3, alpha=3.0)
    dc = derive_constants(params)
    assert dc.beta > 0
    c = dc.beta ** (1.0 / params.alpha)
    k = 2.0 / params.alpha
    for r in np.linspace(0.1, 10.0, 97):
        f = c * r ** (-k)
        fprime = -k * c * r ** (-k - 1.0)
        fpp = profile_rhs(r, f, fprime, params)
        exact = singular_profile_second_derivative(params.alpha, dc.beta, r)
        assert abs(fpp - exact) <= 1e-10 * max(1.0, abs(exact))


def test_trivial_start_stays_zero():
    traj = integrate_profile(0.0, P31, r_max=20.0)
    assert np.all(traj.values == 0.0)
    assert len(traj.zeros) == 0
    est = estimate_L(traj, P31)
    assert est.value == 0.0 and est.converged


def test_antisymmetry_in_a():
    plus = integrate_profile(2.0, P31, r_max=40.0)
    minus = integrate_profile(-2.0, P31, r_max=40.0)
    assert np.array_equal(plus.grid, minus.grid)
    assert np.max(np.abs(plus.values + minus.values)) <= 1e-13 * 2.0
    assert np.max(np.abs(plus.derivs + minus.derivs)) <= 1e-13 * 2.0
    assert count_zeros_profile(plus) == count_zeros_profile(minus)


def test_grid_strictly_increasing_and_zero_signs():
    traj = integrate_profile(20.0, P31, r_max=40.0)
    assert np.all(np.diff(traj.grid) > 0)
    assert len(traj.zeros) == len(traj.zero_signs)
    # f starts positive, so the derivative at the first crossing is negative
    # and the signs alternate for simple zeros.
    expected = [(-1) ** (i + 1) for i in range(len(traj.zeros))]
    assert np.array_equal(traj.zero_signs, expected)


def test_matches_fixed_step_rk4():
    # Adaptive run against an independent classical RK4 at step 1e-4.
    traj = integrate_profile(1.0, P32, r_max=40.0, tol=1e-10)
    oracle = rk4_profile(1.0, 3, 2.0, r_max=40.0, h=1e-4)
    spline = traj.spline()
    sup = max(abs(float(spline(r)) - f) for r, (f, _) in oracle.items())
    assert sup <= 1e-6


def test_zero_count_ladder():
    # Zero counts step up as the shooting height grows (frozen from runs that
    # are stable under tolerance halving and window doubling).
    for a, count in [(1.0, 0), (5.0, 1), (20.0, 2), (60.0, 3)]:
        traj = integrate_profile(a, P31, r_max=60.0)
        assert count_zeros_profile(traj) == count
        again = integrate_profile(a, P31, r_max=120.0, tol=5e-11)
        assert count_zeros_profile(again) == count


def test_small_heights_have_no_zeros():
    for a in np.linspace(0.1, 1.0, 7):
        traj = integrate_profile(float(a), P31, r_max=40.0)
        assert count_zeros_profile(traj) == 0
        est = estimate_L(traj, P31)
        assert est.value > 0


def test_limit_sign_tracks_zero_parity():
    for a in (1.0, 5.0, 20.0, 60.0):
        traj, est = shoot_profile(a, P31)
        m = count_zeros_profile(traj)
        assert est.converged
        assert math.copysign(1.0, est.value) == (-1.0) ** m


def test_shoot_profile_frozen_value():
    # Anchor for the decay limit at a = 2 (N = 3, alpha = 1); value frozen
    # from a converged run and checked loosely against window uncertainty.
    traj, est = shoot_profile(2.0, P31)
    assert est.converged
    assert est.value == pytest.approx(-0.31705813846039066, abs=5e-6)
    assert est.uncertainty < 1e-4
    assert count_zeros_profile(traj) == 1


def test_estimate_L_antisymmetry():
    _, plus = shoot_profile(3.0, P32)
    _, minus = shoot_profile(-3.0, P32)
    assert plus.value == pytest.approx(-minus.value, abs=1e-12)


def test_envelope_constant_stable_under_window_doubling():
    t1 = integrate_profile(5.0, P31, r_max=40.0)
    t2 = integrate_profile(5.0, P31, r_max=80.0)
    c1 = t1.meta["envelope_C"]
    c2 = t2.meta["envelope_C"]
    assert abs(c2 - c1) <= 0.1 * max(c1, c2)


def test_window_too_short():
    traj = integrate_profile(2.0, P31, r_max=2.0)
    with pytest.raises(WindowTooShort):
        estimate_L(traj, P31)


def test_estimate_L_rejects_wrong_variable():
    traj = integrate_profile(2.0, P31, r_max=40.0)
    traj.variable = Variable.INVERTED_S
    with pytest.raises(WindowTooShort):
        estimate_L(traj, P31)


def test_local_defect_under_reintegration():
    # Re-running short spans from stored states at a much tighter tolerance
    # measures the per-span defect of the original run; it should sit at the
    # requested tolerance, not above 10x it.
    from scipy.integrate import solve_ivp

    tol = 1e-8
    traj = integrate_profile(2.0, P31, r_max=40.0, tol=tol)
    idx = np.arange(5, len(traj.grid) - 1, 37)
    worst = 0.0
    for i in idx:
        r0, r1 = traj.grid[i], traj.grid[i + 1]
        sol = solve_ivp(
            lambda r, y: [y[1], profile_rhs(r, y[0], y[1], P31)],
            (r0, r1),
            [traj.values[i], traj.derivs[i]],
            method="RK45",
            rtol=1e-12,
            atol=1e-15,
        )
        defect = abs(sol.y[0, -1] - traj.values[i + 1])
        worst = max(worst, defect / max(1.0, abs(traj.values[i + 1])))
    assert worst <= 10.0 * tol


def test_odd_profile_requires_dim_one():
    with pytest.raises(RegimeMismatch):
        integrate_odd_profile(1.0, ProblemParams(n=3, alpha=1.0))


def test_odd_profile_starts_at_origin():
    p = ProblemParams(n=1, alpha=2.0)
    traj = integrate_odd_profile(1.0, p, r_max=20.0)
    assert traj.grid[0] == 0.0
    assert traj.values[0] == 0.0
    assert traj.derivs[0] == 1.0
    # The anchored zero at the origin is not counted.
    assert 0.0 not in traj.zeros


def test_odd_profile_matches_rk4():
    p = ProblemParams(n=1, alpha=2.0)
    traj = integrate_odd_profile(1.0, p, r_max=40.0, tol=1e-10)
    oracle = rk4_profile(1.0, 1, 2.0, r_max=40.0, h=1e-4, odd=True)
    spline = traj.spline()
    sup = max(abs(float(spline(r)) - f) for r, (f, _) in oracle.items())
    assert sup <= 1e-6


def test_odd_limit_agrees_between_integrators():
    # L1(1) estimated from the adaptive run and from a trajectory rebuilt
    # out of fixed-step RK4 checkpoints must agree tightly.
    from ssheat import Trajectory

    p = ProblemParams(n=1, alpha=2.0)
    traj, est = shoot_odd_profile(1.0, p)
    assert est.converged
    oracle = rk4_profile(1.0, 1, 2.0, r_max=float(traj.grid[-1]), h=1e-4, odd=True)
    rs = np.array(sorted(oracle))
    fs = np.array([oracle[r][0] for r in rs])
    fps = np.array([oracle[r][1] for r in rs])
    rebuilt = Trajectory(
        variable=Variable.RADIUS_R,
        grid=rs,
        values=fs,
        derivs=fps,
        zeros=np.array([]),
        zero_signs=np.array([]),
        params=p,
        meta={"odd": True, "a": 1.0},
    )
    est2 = estimate_L1_odd(rebuilt, p)
    assert abs(est2.value - est.value) <= 1e-6


def test_odd_antisymmetry_in_b():
    p = ProblemParams(n=1, alpha=1.0)
    plus = integrate_odd_profile(2.0, p, r_max=40.0)
    minus = integrate_odd_profile(-2.0, p, r_max=40.0)
    assert np.max(np.abs(plus.values + minus.values)) <= 1e-13 * 2.0
    assert count_zeros_odd(plus) == count_zeros_odd(minus)


def test_odd_zero_count_stability():
    p = ProblemParams(n=1, alpha=1.0)
    for b in (1.0, 6.0, 30.0):
        t1 = integrate_odd_profile(b, p, r_max=60.0)
        t2 = integrate_odd_profile(b, p, r_max=120.0, tol=5e-11)
        assert count_zeros_odd(t1) == count_zeros_odd(t2)


def test_count_zeros_rejects_trivial():
    traj = integrate_profile(0.0, P31, r_max=10.0)
    with pytest.raises(ValueError):
        count_zeros_profile(traj)
