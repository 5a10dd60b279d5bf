"""Shooting on the radial profile equation.

For u(t,x) = t^(-1/alpha) f(|x|/sqrt(t)) the profile solves

    f'' + ((N-1)/r + r/2) f' + f/alpha + |f|^alpha f = 0,   r > 0,
    f(0) = a,  f'(0) = 0,

and every bounded solution has a tail limit L(a) = lim r^(2/alpha) f(r).
The number of zeros on (0, infinity) is finite; both quantities drive the
branch search.  In dimension one there is additionally the odd family

    g'' + (r/2) g' + g/alpha + |g|^alpha g = 0,   g(0) = 0, g'(0) = b,

with its own tail limit L1(b) and zero count (the forced zero at r = 0 is
not counted).

The (N-1)/r term is removed near the axis by a four-term even Taylor series;
the integrator starts at the matching radius.  Tail limits are read off a
geometric checkpoint ladder of phi(r) = r^(2/alpha) f(r), improved by the
first-order correction phi - g(phi)/r^2 that follows from the expansion of
the inverted equation at s = r^(-2) -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import RegimeMismatch, StepSizeUnderflow, WindowTooShort
from .params import ProblemParams, derive_constants

__all__ = [
    "Variable",
    "Trajectory",
    "LimitEstimate",
    "profile_rhs",
    "integrate_profile",
    "integrate_odd_profile",
    "estimate_L",
    "estimate_L1_odd",
    "count_zeros_profile",
    "count_zeros_odd",
    "shoot_profile",
    "shoot_odd_profile",
    "default_r_max",
]

_SERIES_RADIUS = 1e-3


class Variable(str, Enum):
    RADIUS_R = "RadiusR"
    INVERTED_S = "InvertedS"


@dataclass
class Trajectory:
    """Dense numerical solution of one of the radial ODEs.

    zeros holds refined zero locations in the open interval; zero_signs the
    sign of the derivative at each (simple zeros).  meta carries solver
    statistics and the reported envelope constant.
    """

    variable: Variable
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    zeros: np.ndarray
    zero_signs: np.ndarray
    params: ProblemParams
    meta: dict = field(default_factory=dict)

    def spline(self) -> CubicHermiteSpline:
        sp = self.meta.get("_spline")
        if sp is None:
            sp = CubicHermiteSpline(self.grid, self.values, self.derivs)
            self.meta["_spline"] = sp
        return sp


@dataclass(frozen=True)
class LimitEstimate:
    """A tail limit with an honest uncertainty.

    converged means the last checkpoints agreed within the requested
    tolerance; uncertainty is their spread either way.  window is the radius
    (or inverted-time) range the plateau was measured on.
    """

    value: float
    uncertainty: float
    converged: bool
    window: tuple


def _nonlin(alpha: float, x):
    return np.abs(x) ** alpha * x


def profile_rhs(r: float, f: float, fp: float, params: ProblemParams) -> float:
    """f'' from the profile equation; regularized value at the axis.

    At r = 0 smoothness forces f'(0) = 0 and the l'Hopital limit turns the
    (N-1)/r term into (N-1) f''(0), giving f''(0) = -(f/alpha + |f|^a f)/N.
    """
    n, alpha = params.n, params.alpha
    force = f / alpha + _nonlin(alpha, f)
    if r == 0.0:
        if fp != 0.0:
            raise ValueError("profile_rhs at r=0 requires fp=0 (smooth axis)")
        return -force / n
    return -((n - 1) / r + r / 2.0) * fp - force


def _series_coeffs(a: float, params: ProblemParams):
    """Coefficients of f = a + c2 r^2 + c4 r^4 + c6 r^6 near the axis."""
    n, alpha = params.n, params.alpha
    aa = abs(a)
    c2 = -(a / alpha + _nonlin(alpha, a)) / (2.0 * n)
    dnl = (alpha + 1.0) * aa ** alpha  # d/df |f|^a f at a
    c4 = -c2 * (1.0 + 1.0 / alpha + dnl) / (4.0 * n + 8.0)
    if a == 0.0:
        c6 = 0.0
    else:
        # second derivative of |f|^a f at a: (a+1) a |f|^(a-1) sign(f)
        d2nl = (alpha + 1.0) * alpha * aa ** (alpha - 1.0) * math.copysign(1.0, a)
        c6 = -(c4 * (2.0 + 1.0 / alpha + dnl) + 0.5 * d2nl * c2 * c2) / (6.0 * n + 24.0)
    return c2, c4, c6


def _series_eval(a, c2, c4, c6, r):
    f = a + r * r * (c2 + r * r * (c4 + r * r * c6))
    fp = r * (2.0 * c2 + r * r * (4.0 * c4 + r * r * 6.0 * c6))
    return f, fp


def _series_radius(a, c6, tol):
    """Shrink the matching radius when |a| is large enough that the truncated
    series term would exceed a small fraction of the error budget."""
    budget = 0.01 * tol * max(1.0, abs(a))
    if c6 == 0.0 or abs(c6) * _SERIES_RADIUS ** 6 <= budget:
        return _SERIES_RADIUS
    return (budget / abs(c6)) ** (1.0 / 6.0)


def _refine_zeros(grid, values, spline, lo_index, tol):
    """Bracket sign changes on a subdivided grid and bisect to 1e-12 in r.

    lo_index: first grid index to include in the scan (used to skip the
    forced zero of the odd family at r = 0).
    """
    zeros = []
    signs = []
    g = grid[lo_index:]
    if len(g) < 2:
        return np.array(zeros), np.array(signs)
    # subdivide each step: oscillations are already resolved by the adaptive
    # steps, the extra sampling only tightens the initial brackets
    nsub = 8
    frac = np.linspace(0.0, 1.0, nsub, endpoint=False)
    pts = (g[:-1, None] + np.diff(g)[:, None] * frac[None, :]).ravel()
    pts = np.append(pts, g[-1])
    vals = spline(pts)
    sgn = np.sign(vals)
    # walk through nonzero signs, bracketing every flip
    idx = np.nonzero(sgn)[0]
    if len(idx) < 2:
        return np.array(zeros), np.array(signs)
    flips = np.nonzero(sgn[idx[:-1]] * sgn[idx[1:]] < 0)[0]
    dsp = spline.derivative()
    for k in flips:
        lo, hi = pts[idx[k]], pts[idx[k + 1]]
        flo = spline(lo)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fmid = spline(mid)
            if fmid == 0.0:
                lo = hi = mid
                break
            if flo * fmid < 0:
                hi = mid
            else:
                lo, flo = mid, fmid
            if hi - lo <= 1e-12:
                break
        z = 0.5 * (lo + hi)
        zeros.append(z)
        signs.append(1.0 if dsp(z) >= 0 else -1.0)
    return np.array(zeros), np.array(signs)


def default_r_max(params: ProblemParams) -> float:
    return 40.0 * max(1.0, math.sqrt(params.alpha))


def _run_profile(a, params, r_max, tol, odd):
    n, alpha = params.n, params.alpha

    if a == 0.0:
        grid = np.linspace(0.0, r_max, 17)
        zero = np.zeros_like(grid)
        return Trajectory(
            variable=Variable.RADIUS_R,
            grid=grid,
            values=zero,
            derivs=zero.copy(),
            zeros=np.array([]),
            zero_signs=np.array([]),
            params=params,
            meta={"a": a, "tol": tol, "r_max": r_max, "trivial": True,
                  "odd": odd, "envelope_C": 0.0, "nsteps": len(grid)},
        )

    def rhs(r, y):
        f, fp = y
        force = f / alpha + _nonlin(alpha, f)
        if odd:
            return [fp, -(r / 2.0) * fp - force]
        return [fp, -((n - 1) / r + r / 2.0) * fp - force]

    if odd:
        r0 = 0.0
        y0 = [0.0, a]
        head_r = np.array([])
        head_f = np.array([])
        head_fp = np.array([])
    else:
        c2, c4, c6 = _series_coeffs(a, params)
        r0 = _series_radius(a, c6, tol)
        f0, fp0 = _series_eval(a, c2, c4, c6, r0)
        y0 = [f0, fp0]
        head_r = np.linspace(0.0, r0, 5)[:-1]
        head_f, head_fp = _series_eval(a, c2, c4, c6, head_r)

    atol = 1e-14 * max(1.0, abs(a))
    sol = solve_ivp(
        rhs,
        (r0, r_max),
        y0,
        method="RK45",
        rtol=tol,
        atol=atol,
        dense_output=False,
        max_step=r_max / 16.0,
    )
    if sol.status == -1:
        raise StepSizeUnderflow(f"profile integration stalled at r={sol.t[-1]}: {sol.message}")

    grid = np.concatenate([head_r, sol.t])
    values = np.concatenate([head_f, sol.y[0]])
    derivs = np.concatenate([head_fp, sol.y[1]])

    envelope = float(np.max((1.0 + grid ** 2) ** (1.0 / alpha) * (np.abs(values) + grid * np.abs(derivs))))
    traj = Trajectory(
        variable=Variable.RADIUS_R,
        grid=grid,
        values=values,
        derivs=derivs,
        zeros=np.array([]),
        zero_signs=np.array([]),
        params=params,
        meta={"a": a, "tol": tol, "r_max": r_max, "r_series": None if odd else r0,
              "odd": odd, "nsteps": len(sol.t), "nfev": sol.nfev,
              "envelope_C": envelope},
    )
    # skip the head and, for the odd family, the forced zero at the origin
    lo_index = len(head_r) if not odd else 1
    zeros, signs = _refine_zeros(grid, values, traj.spline(), lo_index, tol)
    keep = zeros > 1e-10
    traj.zeros = zeros[keep]
    traj.zero_signs = signs[keep]
    dsp = traj.spline().derivative()
    if len(traj.zeros) and np.min(np.abs(dsp(traj.zeros))) <= math.sqrt(tol):
        traj.meta["degenerate_zero"] = True
    return traj


def integrate_profile(a: float, params: ProblemParams, r_max: float | None = None,
                      tol: float = 1e-10) -> Trajectory:
    """Integrate the even profile f_a on [0, r_max] with refined zeros."""
    if r_max is None:
        r_max = default_r_max(params)
    return _run_profile(float(a), params, float(r_max), tol, odd=False)


def integrate_odd_profile(b: float, params: ProblemParams, r_max: float | None = None,
                          tol: float = 1e-10) -> Trajectory:
    """Integrate the odd one-dimensional profile g_b (g(0)=0, g'(0)=b)."""
    if params.n != 1:
        raise RegimeMismatch("odd shooting is defined only in dimension one")
    if r_max is None:
        r_max = default_r_max(params)
    return _run_profile(float(b), params, float(r_max), tol, odd=True)


def count_zeros_profile(traj: Trajectory) -> int:
    """Number of refined zeros of f_a on (0, r_max); rejects the a=0 trajectory."""
    if traj.meta.get("trivial"):
        raise ValueError("zero counting is undefined for the identically zero profile")
    return int(len(traj.zeros))


def count_zeros_odd(traj: Trajectory) -> int:
    """Zeros of g_b on (0, r_max), the forced zero at r=0 excluded."""
    if traj.meta.get("trivial"):
        raise ValueError("zero counting is undefined for the identically zero profile")
    if not traj.meta.get("odd"):
        raise ValueError("trajectory is not from the odd family")
    return int(len(traj.zeros))


def estimate_L(traj: Trajectory, params: ProblemParams | None = None,
               tol: float = 1e-6) -> LimitEstimate:
    """Tail limit L = lim r^(2/alpha) f(r) from a corrected checkpoint ladder.

    Checkpoints are geometric in r ending at r_max.  Each raw value
    phi = r^(2/alpha) f is replaced by phi - g(phi)/r^2, the first-order
    tail correction (w(s) = L + g(L) s + O(s^2) at s = r^(-2)).  Convergence
    requires the last three corrected values to agree within tol.
    """
    if params is None:
        params = traj.params
    if traj.variable != Variable.RADIUS_R:
        raise WindowTooShort("tail limit ladder expects a radius-variable trajectory")
    if traj.meta.get("trivial"):
        return LimitEstimate(0.0, 0.0, True, (0.0, traj.grid[-1]))

    dc = derive_constants(params)
    alpha = params.alpha
    r_hi = traj.grid[-1]
    floor = max(3.0, traj.grid[0] + 1.0, r_hi / 16.0)
    if len(traj.zeros):
        floor = max(floor, 1.25 * traj.zeros[-1])
    ratio = 2.0 ** (1.0 / 3.0)
    ks = []
    r = r_hi
    while r >= floor and len(ks) < 64:
        ks.append(r)
        r /= ratio
    if len(ks) < 4:
        raise WindowTooShort(
            f"only {len(ks)} checkpoints fit between r={floor:.3g} and r_max={r_hi:.3g}"
        )
    rs = np.array(ks[::-1])
    phi = rs ** (2.0 / alpha) * traj.spline()(rs)
    corrected = phi - (-dc.beta * phi + _nonlin(alpha, phi)) / rs ** 2
    last = corrected[-3:]
    spread = float(np.max(last) - np.min(last))
    value = float(corrected[-1])
    converged = spread <= tol
    return LimitEstimate(value, spread, converged, (float(rs[-3]), float(r_hi)))


def estimate_L1_odd(traj: Trajectory, params: ProblemParams | None = None,
                    tol: float = 1e-6) -> LimitEstimate:
    """Tail limit L1 = lim r^(2/alpha) g_b(r) of the odd family."""
    if not traj.meta.get("odd") and not traj.meta.get("trivial"):
        raise ValueError("trajectory is not from the odd family")
    return estimate_L(traj, params, tol)


def _shoot(integrator, estimator, x, params, tol, plateau_tol, r_max, max_doublings):
    if r_max is None:
        r_max = default_r_max(params)
    traj = integrator(x, params, r_max, tol)
    est = None
    for _ in range(max_doublings + 1):
        try:
            est = estimator(traj, params, plateau_tol)
        except WindowTooShort:
            est = None
        if est is not None and est.converged:
            return traj, est
        r_max *= 2.0
        traj = integrator(x, params, r_max, tol)
    if est is None:
        est = estimator(traj, params, plateau_tol)
    return traj, est


def shoot_profile(a: float, params: ProblemParams, tol: float = 1e-10,
                  plateau_tol: float = 1e-6, r_max: float | None = None,
                  max_doublings: int = 4):
    """Integrate f_a, extending r_max (up to 4 doublings) until L(a) settles.

    Returns (trajectory, limit estimate); the estimate may be honest
    non-converged if the doubling budget runs out.
    """
    return _shoot(integrate_profile, estimate_L, a, params, tol, plateau_tol,
                  r_max, max_doublings)


def shoot_odd_profile(b: float, params: ProblemParams, tol: float = 1e-10,
                      plateau_tol: float = 1e-6, r_max: float | None = None,
                      max_doublings: int = 4):
    """Odd-family counterpart of shoot_profile (dimension one only)."""
    return _shoot(integrate_odd_profile, estimate_L1_odd, b, params, tol,
                  plateau_tol, r_max, max_doublings)
