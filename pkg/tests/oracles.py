"""Independent reference implementations used only by the test suite.

These deliberately avoid the package's own integrator and quadrature paths:
a fixed-step classical Runge-Kutta loop, plain finite differences, and
closed-form special-function identities.
"""

import math


def rk4_profile(a, n, alpha, r_max, h, odd=False, checkpoint_every=0.5):
    """Fixed-step RK4 for the profile ODE; returns {r: (f, fp)} checkpoints.

    Starts just off the axis with the forced quadratic term (even family) or
    exactly at the origin (odd family, N=1 only).  Checkpoint radii are
    recomputed as r0 + k*h, never accumulated, so the labels carry no drift.
    """

    def rhs(r, f, fp):
        force = f / alpha + abs(f) ** alpha * f
        if odd:
            return fp, -(r / 2.0) * fp - force
        return fp, -((n - 1) / r + r / 2.0) * fp - force

    if odd:
        r0, f, fp = 0.0, 0.0, a
    else:
        c2 = -(a / alpha + abs(a) ** alpha * a) / (2.0 * n)
        r0 = h
        f = a + c2 * r0 * r0
        fp = 2.0 * c2 * r0

    steps = int(round((r_max - r0) / h))
    per_cp = int(round(checkpoint_every / h))
    out = {}
    r = r0
    for i in range(steps):
        if odd and r == 0.0:
            k1f, k1p = fp, -(f / alpha + abs(f) ** alpha * f)
        else:
            k1f, k1p = rhs(r, f, fp)
        k2f, k2p = rhs(r + h / 2, f + h / 2 * k1f, fp + h / 2 * k1p)
        k3f, k3p = rhs(r + h / 2, f + h / 2 * k2f, fp + h / 2 * k2p)
        k4f, k4p = rhs(r + h, f + h * k3f, fp + h * k3p)
        f += h / 6 * (k1f + 2 * k2f + 2 * k3f + k4f)
        fp += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        r = r0 + (i + 1) * h
        if (i + 1) % per_cp == 0:
            out[r] = (f, fp)
    return out


def central_diff(fn, x, h):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def second_diff(fn, x, h):
    return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / (h * h)


def singular_profile_second_derivative(alpha, beta, r):
    """Analytic f'' of the stationary singular profile beta^(1/a) r^(-2/a)."""
    k = 2.0 / alpha
    c = beta ** (1.0 / alpha)
    return k * (k + 1.0) * c * r ** (-k - 2.0)
