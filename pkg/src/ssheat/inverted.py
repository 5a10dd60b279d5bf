"""Singular initial-value solver for the inverted profile equation.

The even profile f(r) seen through w(s) = s^(-1/alpha) f(1/sqrt(s)) obeys

    4 s^2 w'' + 4 gamma s w' - w' - beta w + |w|^alpha w = 0,

an equation whose s = 0 point is an irregular singularity: the homogeneous
derivative factor is s^(-gamma) exp(-1/(4s)).  A solution with w(0) = mu is
picked out by the flatness condition w'(s1) = 0 at a matching radius
s1 = nu mu^(-alpha).

Construction used here.  Rather than root-finding on the pair
(w(sigma), w'(sigma)) of an interior point, which is hopeless in floating
point (the sensitivity of w'(s1) to w'(sigma) carries the factor
exp(1/(4 s1) - 1/(4 sigma)) and underflows), we anchor at s1 itself:
integrate backward from (w(s1) = omega, w'(s1) = 0) to s = 0 in the
log-compressed variable theta = log(1/(4s)), where the equation becomes
non-stiff for an L-stable method, and run a one-dimensional Brent search on
omega so that the frozen deep value equals mu.  The map omega -> w(0) has
derivative 1 + O(nu), so the search is well conditioned.  The fixed-point
character of the problem is certified separately: a Picard iteration on the
exact kernel representation over [0, 2 s1] must contract with ratio < 1/2,
else nu is halved and the construction repeats.

Beyond the flat point the equation anti-damps: H = 2s^2 w'^2 + G(w) obeys
H' = w'^2 (1 - 4(gamma-1)s), positive below s = 1/(4(gamma-1)), so once the
solution starts oscillating its amplitude is pumped at the averaged rate
d ln H / ds = c (1 - 4(gamma-1)s) / (2s^2) with c the virial fraction of the
|w|^(alpha+2) potential.  Integrated from s1 ~ mu^-alpha this produces
amplitudes of order exp(c mu^alpha / const): for large mu the oscillations
outgrow double precision and their number outgrows any step budget.  The
continuation therefore enumerates oscillations faithfully only while the
amplitude stays below a cutoff; past the cutoff the zero census (count and
local spacing) is carried by the closed-form averaged envelope, which is
the standard adiabatic description of exactly this pumping and is accurate
to the adiabatic parameter reported alongside.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import beta as _beta_integral

from .errors import (
    ContractionFailed,
    DomainMismatch,
    RegimeMismatch,
    RootFindDiverged,
    StepSizeUnderflow,
    WindowTooShort,
)
from .params import ProblemParams, Regime, derive_constants
from .profile import (
    LimitEstimate,
    Trajectory,
    Variable,
    _nonlin,
    _refine_zeros,
)

_trapz = getattr(np, "trapezoid", np.trapz)


def g_nonlinearity(x, params: ProblemParams):
    """g(x) = -beta x + |x|^alpha x; vanishes at 0 and at +-beta^(1/alpha)."""
    dc = derive_constants(params)
    return -dc.beta * x + _nonlin(params.alpha, x)


def G_potential(x, params: ProblemParams):
    """Antiderivative of g with G(0) = 0."""
    dc = derive_constants(params)
    a = params.alpha
    return -0.5 * dc.beta * x * x + np.abs(x) ** (a + 2.0) / (a + 2.0)


class AsymptoticMode(str, Enum):
    SLOW = "Slow"
    FAST = "Fast"
    UNDETERMINED = "Undetermined"


@dataclass
class InvertedSolution:
    traj: Trajectory
    mu: float
    s1: float
    contraction_ratio: float
    meta: dict = field(default_factory=dict)


@dataclass
class Classification:
    mode: AsymptoticMode
    Ltilde: LimitEstimate
    Ltilde1: LimitEstimate | None
    regime: Regime
    diagnostics: dict = field(default_factory=dict)


def default_s_max(params: ProblemParams) -> float:
    dc = derive_constants(params)
    return {
        Regime.BETA_POS: 1e4,
        Regime.BETA_NEG: 1e4,
        Regime.DIM_TWO: 1e5,
        Regime.BETA_ZERO: 1e6,
        Regime.DIM_ONE: 1e4,
    }[dc.regime]


def _ipe_rhs(s, y, alpha, beta, gamma):
    w, v = y
    g = -beta * w + abs(w) ** alpha * w
    return [v, -((4.0 * gamma * s - 1.0) * v + g) / (4.0 * s * s)]


def _ipe_jac(s, y, alpha, beta, gamma):
    w, v = y
    gp = -beta + (alpha + 1.0) * abs(w) ** alpha
    s2 = 4.0 * s * s
    return [[0.0, 1.0], [-gp / s2, -(4.0 * gamma * s - 1.0) / s2]]


def _backward_deep(omega, s1, params, dc, tol, decades=10.0):
    """Integrate from (w, w')(s1) = (omega, 0) down to s1 * 10^-decades.

    In theta = log(1/(4s)) the derivative relaxes onto the slave value g(w)
    at rate e^theta while w itself freezes; Radau crosses the whole range in
    a few dozen steps.  The leftover first-order drift below the endpoint is
    removed analytically by _deep_endpoint.
    """
    alpha, beta, gamma = params.alpha, dc.beta, dc.gamma
    theta1 = math.log(1.0 / (4.0 * s1))
    theta_end = theta1 + decades * math.log(10.0)

    def rhs(theta, y):
        w, v = y
        c = math.exp(theta)
        s = 0.25 * math.exp(-theta)
        g = -beta * w + abs(w) ** alpha * w
        return [-s * v, (gamma - c) * v + c * g]

    def jac(theta, y):
        w, v = y
        c = math.exp(theta)
        s = 0.25 * math.exp(-theta)
        gp = -beta + (alpha + 1.0) * abs(w) ** alpha
        return [[0.0, -s], [c * gp, gamma - c]]

    sol = solve_ivp(
        rhs,
        (theta1, theta_end),
        [omega, 0.0],
        method="Radau",
        rtol=max(1e-12, 0.1 * tol),
        atol=1e-14 * max(1.0, abs(omega)),
        jac=jac,
    )
    if not sol.success:
        raise StepSizeUnderflow(f"deep backward sweep failed: {sol.message}")
    return sol


def _deep_endpoint(deep, params):
    """w(0) from a deep sweep: the endpoint minus the residual slave drift."""
    s_end = 0.25 * math.exp(-deep.t[-1])
    w_end = float(deep.y[0, -1])
    return w_end - s_end * float(g_nonlinearity(w_end, params))


def _slave_seed(mu, nu, params, dc):
    """Leading-order w(s1) from the reduced flow w' = g(w).

    In tau = s mu^alpha the flow is W' = W^(alpha+1) - b W with
    b = beta mu^(-alpha); y = W^(-alpha) is linear in tau and solvable in
    closed form, which seeds the bracket well even when nu is not tiny.
    """
    a = params.alpha
    b = dc.beta * mu ** (-a)
    if abs(b) < 1e-12:
        y = 1.0 - a * nu
    else:
        e = math.exp(a * b * nu)
        y = e - (e - 1.0) / b
    if y <= 0.0:
        return 2.0 * mu
    return mu * y ** (-1.0 / a)


def _match_origin(mu, s1, nu, params, dc, tol):
    """Brent search on omega = w(s1) so the deep frozen value equals mu."""

    def w0(om):
        return _deep_endpoint(_backward_deep(om, s1, params, dc, tol), params)

    omega0 = _slave_seed(mu, nu, params, dc)
    delta = max(0.6 * abs(omega0 - mu), 1e-8 * mu)
    lo, hi = omega0 - delta, omega0 + delta
    flo, fhi = w0(lo) - mu, w0(hi) - mu
    tries = 0
    while flo * fhi > 0.0:
        delta *= 3.0
        lo, hi = omega0 - delta, omega0 + delta
        flo, fhi = w0(lo) - mu, w0(hi) - mu
        tries += 1
        if tries > 40 or not (math.isfinite(flo) and math.isfinite(fhi)):
            raise RootFindDiverged(
                f"no bracket for w(s1) around {omega0:.6g} (mu={mu}, s1={s1:.3g})"
            )
    omega = brentq(lambda om: w0(om) - mu, lo, hi,
                   xtol=1e-15 * max(1.0, mu), rtol=8.9e-16, maxiter=150)
    deep = _backward_deep(omega, s1, params, dc, tol)
    return float(omega), deep, {"bracket_expansions": tries}


def _continue_forward(omega, s1, s_hi, params, dc, tol, mu_scale, amp_cap):
    def overgrown(s, y, alpha, beta, gamma):
        return abs(y[0]) - amp_cap

    overgrown.terminal = True
    overgrown.direction = 1.0
    sol = solve_ivp(
        _ipe_rhs,
        (s1, s_hi),
        [omega, 0.0],
        args=(params.alpha, dc.beta, dc.gamma),
        method="Radau",
        rtol=tol,
        atol=1e-12 * max(1.0, mu_scale),
        jac=_ipe_jac,
        dense_output=True,
        events=overgrown,
    )
    if not sol.success:
        raise StepSizeUnderflow(f"forward continuation stalled at s={sol.t[-1]}: {sol.message}")
    return sol


def _virial_constants(alpha):
    """(k, I_T, c_vir) for the closed orbits of the |w|^k / k potential.

    I_T and I_E are int_0^1 (1 - x^k)^(-1/2) dx and its +1/2 partner; their
    ratio is the orbit-mean of the kinetic fraction of H, which by the virial
    theorem equals k/(k+2).  Both the Beta form and the ratio are kept since
    I_T also enters the period.
    """
    k = alpha + 2.0
    I_T = _beta_integral(1.0 / k, 0.5) / k
    I_E = _beta_integral(1.0 / k, 1.5) / k
    return k, I_T, I_E / I_T


def _envelope_lnH(s, env):
    s0 = env["s_start"]
    cv = env["c_vir"]
    return (env["lnH_start"]
            + 0.5 * cv * (1.0 / s0 - 1.0 / s)
            - 2.0 * cv * (env["gamma"] - 1.0) * np.log(s / s0))


def envelope_zero_census(sol, lo=None, hi=None, n=800):
    """Zero count and gap extremes of the averaged high-amplitude phase.

    When the oscillation amplitude outruns the enumeration cutoff the energy
    H = 2 s^2 w'^2 + G(w) follows the period-averaged law
    d ln H / ds = c_vir (1 - 4(gamma-1)s) / (2 s^2) and the local zero
    spacing is half the orbit period T = 4 sqrt(2) I_T s A / sqrt(H) with
    A = (kH)^(1/k).  Everything is evaluated in logs so the astronomically
    large counts and energies never touch floating-point range; the count is
    returned as log10.
    """
    env = sol.meta.get("envelope")
    if env is None:
        raise DomainMismatch("solution was fully enumerated; no envelope census")
    alpha = sol.traj.params.alpha
    k = alpha + 2.0
    lo = env["s_start"] if lo is None else max(float(lo), env["s_start"])
    hi = float(sol.traj.meta.get("s_max", sol.traj.grid[-1])) if hi is None else float(hi)
    if hi <= lo:
        raise ValueError("empty census range")
    x = np.linspace(math.log(lo), math.log(hi), n)
    s = np.exp(x)
    lnH = _envelope_lnH(s, env)
    c0 = math.log(2.0 * math.sqrt(2.0) * env["I_T"] * k ** (1.0 / k))
    q = (alpha / (2.0 * k)) * lnH - c0        # ln(zeros per unit ln s)
    m = float(np.max(q))
    count_ln = m + math.log(float(_trapz(np.exp(q - m), x)))
    ln_gap = np.clip(x - q, -745.0, 700.0)    # gap(s) = 1 / (zeros per unit s)
    return {
        "count_log10": count_ln / math.log(10.0),
        "max_gap": float(np.exp(np.max(ln_gap))),
        "min_gap": float(np.exp(np.min(ln_gap))),
        "lnH_hi": float(lnH[-1]),
        "amp_log10_hi": float((lnH[-1] + math.log(k)) / k / math.log(10.0)),
    }


def _picard_certificate(sigma, w_sigma, wp_sigma, mu, params, dc,
                        n_nodes=113, n_gauss=48, max_sweeps=12):
    """Contraction diagnostic for the kernel map on [0, sigma].

    Iterates w -> (affine data) - int_s^sigma (r/t)^gamma e^(1/(4r)-1/(4t))
    r^(-2) g(w) pairs, with the exponentials combined so nothing overflows,
    and reports the worst ratio between successive sup-norm increments.
    """
    alpha, beta, gamma = params.alpha, dc.beta, dc.gamma
    s_nodes = np.concatenate([[0.0], np.geomspace(sigma * math.exp(-14.0), sigma, n_nodes)])
    xi, glw = np.polynomial.legendre.leggauss(n_gauss)

    # A(s) = integral of (sigma/t)^gamma e^(1/(4 sigma)-1/(4t)) dt over [s, sigma],
    # via x = 1/(4t) - 1/(4 sigma) so the integrand is smooth and decaying.
    def kernel_A(s):
        if s >= sigma:
            return 0.0
        x_top = 45.0 if s == 0.0 else min(1.0 / (4.0 * s) - 1.0 / (4.0 * sigma), 45.0)
        if x_top <= 0.0:
            return 0.0
        x = 0.5 * x_top * (xi + 1.0)
        t = 0.25 / (x + 0.25 / sigma)
        vals = (sigma / t) ** gamma * np.exp(-x) * 4.0 * t * t
        return float(np.sum(vals * glw) * 0.5 * x_top)

    A = np.array([kernel_A(s) for s in s_nodes])

    # Per-node inner geometry: r(x) = 1/(1/t - 4x) for x in [0, X_t], weights
    # (r/t)^gamma e^(-x).  The t = 0 node degenerates to r = 0.
    n_all = len(s_nodes)
    r_mat = np.zeros((n_all, n_gauss))
    wt_mat = np.zeros((n_all, n_gauss))
    for i, t in enumerate(s_nodes):
        if t == 0.0:
            x_top = 45.0
            x = 0.5 * x_top * (xi + 1.0)
            r_mat[i] = 0.0
            wt_mat[i] = np.exp(-x) * glw * 0.5 * x_top
            continue
        x_top = min(1.0 / (4.0 * t) - 1.0 / (4.0 * sigma), 45.0)
        if x_top <= 0.0:
            continue
        x = 0.5 * x_top * (xi + 1.0)
        r = 1.0 / (1.0 / t - 4.0 * x)
        r_mat[i] = r
        wt_mat[i] = (r / t) ** gamma * np.exp(-x) * glw * 0.5 * x_top

    affine = w_sigma - wp_sigma * A
    w_cur = affine.copy()
    scale = max(1.0, abs(mu))
    increments = []
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_sweeps):
            g_r = np.interp(r_mat.ravel(), s_nodes, w_cur).reshape(r_mat.shape)
            g_r = -beta * g_r + np.abs(g_r) ** alpha * g_r
            inner = 4.0 * np.sum(wt_mat * g_r, axis=1)
            # cumulative trapezoid of inner from each node up to sigma
            seg = 0.5 * (inner[1:] + inner[:-1]) * np.diff(s_nodes)
            F = np.concatenate([(np.cumsum(seg[::-1])[::-1]), [0.0]])
            w_next = affine - 0.25 * F
            increments.append(float(np.max(np.abs(w_next - w_cur))))
            w_cur = w_next
            if not math.isfinite(increments[-1]) or increments[-1] > 1e3 * scale:
                return math.inf, float(w_cur[0]), increments[-1], len(increments)
            if increments[-1] < 1e-13 * scale:
                break
    ratios = [increments[k + 1] / increments[k]
              for k in range(len(increments) - 1) if increments[k] > 0.0]
    ratio = max(ratios) if ratios else 0.0
    return ratio, float(w_cur[0]), increments[-1], len(increments)


def solve_inverted(mu: float, params: ProblemParams, s_max: float | None = None,
                   tol: float = 1e-10) -> InvertedSolution:
    """Solve the inverted equation with w(0) = mu >= 1 and w'(s1) = 0.

    The flat point s1 = nu mu^(-alpha) anchors the whole construction: the
    singular stretch [0, s1] is pinned by a Picard iteration on the kernel
    representation with endpoint data (w, w')(s1) = (omega, 0), which is the
    only placement where every exponential weight in the kernel is <= 1, and
    omega is the single remaining unknown, fixed by a Brent search so the
    frozen deep value equals mu.  nu starts a safe margin below the blowup
    time of the reduced flow w' = g(w) (that keeps the contraction factor
    (alpha+1) W(nu)^alpha nu below 1/2 uniformly in mu, and keeps small-mu
    members tame enough to classify) and is halved, at most eight times,
    until the Picard sweeps contract with ratio < 1/2.  Past s1 the
    equation is regular and the arc is continued by Radau.

    The sup of |w| over [0, 2 s1] is measured densely and reported in
    meta["sup_window_ratio"] (units of mu).  It is a report, not a clamp:
    once mu is large enough that the post-flat fall re-crosses zero inside
    the window, the energy pumping H' = w'^2 (1 - 4(gamma-1)s) amplifies the
    swing by a factor growing like exp(c/s1) and no solution through both
    endpoint conditions keeps the window sup at a small multiple of mu.
    """
    mu = float(mu)
    if mu < 1.0:
        raise ValueError("construction is calibrated for mu >= 1")
    dc = derive_constants(params)
    if s_max is None:
        s_max = default_s_max(params)
    s_max = float(s_max)

    a = params.alpha
    nu = min(1.0 / (8.0 * a), (1.0 - 2.0 ** (-a)) / (4.0 * a))
    ratio = math.inf
    cert = None
    for halving in range(9):
        s1 = nu * mu ** (-a)
        if s_max <= 4.0 * s1:
            raise WindowTooShort(f"s_max={s_max:.3g} does not clear the window 4*s1={4.0 * s1:.3g}")
        omega, deep, match_meta = _match_origin(mu, s1, nu, params, dc, tol)
        ratio, w_pic0, delta_last, sweeps = _picard_certificate(
            s1, omega, 0.0, mu, params, dc)
        if ratio < 0.5:
            cert = {"picard_ratio": ratio, "picard_w0_gap": abs(w_pic0 - mu),
                    "picard_sweeps": sweeps, "picard_last_increment": delta_last,
                    "halvings": halving}
            break
        nu *= 0.5
    if cert is None:
        raise ContractionFailed(
            f"Picard ratio {ratio:.3f} still >= 1/2 after 8 halvings of nu (mu={mu})")

    amp_cap = 100.0 * max(1.0, mu)
    fwd = _continue_forward(omega, s1, s_max, params, dc, tol, mu, amp_cap)

    # assemble: exact s=0 node, deep sweep (reversed to ascending s), forward arc
    s_deep = 0.25 * np.exp(-deep.t)[::-1]
    w_deep = deep.y[0][::-1]
    v_deep = deep.y[1][::-1]
    w0 = _deep_endpoint(deep, params)
    grid = np.concatenate([[0.0], s_deep[:-1], fwd.t])
    values = np.concatenate([[w0], w_deep[:-1], fwd.y[0]])
    derivs = np.concatenate([[float(g_nonlinearity(w0, params))], v_deep[:-1], fwd.y[1]])

    traj = Trajectory(
        variable=Variable.INVERTED_S,
        grid=grid,
        values=values,
        derivs=derivs,
        zeros=np.array([]),
        zero_signs=np.array([]),
        params=params,
        meta={"mu": mu, "tol": tol, "s_max": s_max, "inverted": True,
              "nu": nu, "s1": s1, "omega": omega, "nsteps": len(grid)},
    )
    zeros, signs = _refine_zeros(grid, values, traj.spline(), 0, tol)
    traj.zeros = zeros
    traj.zero_signs = signs

    s_win_hi = min(2.0 * s1, float(fwd.t[-1]))
    dense = np.abs(fwd.sol(np.linspace(s1, s_win_hi, 2000))[0])
    sup_window = max(float(np.max(dense)), float(np.max(np.abs(w_deep))), abs(w0))
    meta = {
        "w0_residual": abs(w0 - mu),
        "sup_window_ratio": sup_window / mu,
        "window_truncated": bool(fwd.status == 1 and float(fwd.t[-1]) < 2.0 * s1),
        **match_meta,
        **cert,
    }

    if fwd.status == 1:
        # amplitude outran the enumeration cutoff; hand the census to the
        # averaged envelope from the stop point onward
        s_stop = float(fwd.t[-1])
        w_stop = float(fwd.y[0][-1])
        v_stop = float(fwd.y[1][-1])
        k, I_T, cv = _virial_constants(a)
        H_stop = 2.0 * s_stop * s_stop * v_stop * v_stop + float(G_potential(w_stop, params))
        env = {"s_start": s_stop, "lnH_start": math.log(H_stop), "c_vir": cv,
               "I_T": I_T, "gamma": dc.gamma, "amp_cap": amp_cap}
        lnrho = (a / (2.0 * k)) * env["lnH_start"] \
            - math.log(2.0 * math.sqrt(2.0) * I_T * k ** (1.0 / k) * s_stop)
        env["adiabatic_eps"] = math.exp(-lnrho) * cv * abs(
            1.0 - 4.0 * (dc.gamma - 1.0) * s_stop) / (2.0 * s_stop * s_stop)
        meta["envelope"] = env
        traj.meta["s_end"] = s_stop

    return InvertedSolution(traj=traj, mu=mu, s1=s1,
                            contraction_ratio=ratio, meta=meta)


def energy_H(sol: InvertedSolution, s):
    """H(s) = 2 s^2 w'(s)^2 + G(w(s)); scalar or array s inside the grid."""
    traj = sol.traj
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < traj.grid[0]) or np.any(s_arr > traj.grid[-1]):
        raise ValueError("s outside the solved range")
    spl = traj.spline()
    w = spl(s_arr)
    v = spl.derivative()(s_arr)
    H = 2.0 * s_arr * s_arr * v * v + G_potential(w, traj.params)
    return float(H) if np.isscalar(s) else H


def count_zeros_inverted(sol: InvertedSolution) -> int:
    """Total zero count on (0, s_max); enumerated, plus the envelope census.

    Whenever the amplitude forced a hand-off to the averaged envelope the
    count is exact only in its exponent; it is returned as a (possibly very
    large) integer so order comparisons across mu remain meaningful.
    """
    n = int(len(sol.traj.zeros))
    if "envelope" not in sol.meta:
        return n
    lg = envelope_zero_census(sol)["count_log10"]
    if lg < 15.0:
        return n + int(round(10.0 ** lg))
    return n + 10 ** int(round(lg))


def riccati_monitors(sol: InvertedSolution):
    """(s, h1, h2) with h2 = s w'/w, h1 = h2 + 1/alpha, on the zero-free tail.

    Only meaningful in the critical regime, where the two decay speeds are
    separated by these logarithmic derivatives; elsewhere RegimeMismatch.
    """
    params = sol.traj.params
    dc = derive_constants(params)
    if dc.regime != Regime.BETA_ZERO:
        raise RegimeMismatch("riccati monitors are defined for the critical regime only")
    traj = sol.traj
    start = 1.0
    if len(traj.zeros):
        start = max(start, 1.05 * float(traj.zeros[-1]))
    dsign = np.sign(traj.derivs)
    flips = np.nonzero(dsign[1:] * dsign[:-1] < 0)[0]
    if len(flips):
        start = max(start, 1.05 * float(traj.grid[flips[-1] + 1]))
    mask = traj.grid > start
    s = traj.grid[mask]
    w = traj.values[mask]
    v = traj.derivs[mask]
    if len(s) < 4:
        raise WindowTooShort("no zero-free tail to monitor")
    h2 = s * v / w
    h1 = h2 + 1.0 / params.alpha
    return np.column_stack([s, h1, h2])


def _geometric_limit(vals, scale):
    """Limit of a geometric-rung ladder with power-law tail extrapolation."""
    v = np.asarray(vals, dtype=float)
    d = np.diff(v)
    if np.max(np.abs(d[-3:])) < 1e-12 * scale:
        spread = float(np.max(v[-3:]) - np.min(v[-3:]))
        return float(v[-1]), spread, True
    rhos = []
    for k in range(len(d) - 3, len(d) - 1):
        if k >= 1 and abs(d[k - 1]) > 0:
            rhos.append(d[k] / d[k - 1])
    if len(rhos) == 2 and all(-0.97 < r < 0.97 for r in rhos) and \
            abs(rhos[0] - rhos[1]) <= 0.3 * max(abs(rhos[0]), abs(rhos[1]), 0.05):
        rho = 0.5 * (rhos[0] + rhos[1])
        lim1 = v[-2] + d[-2] * rho / (1.0 - rho) if abs(1.0 - rho) > 1e-9 else v[-2]
        lim2 = v[-1] + d[-1] * rho / (1.0 - rho) if abs(1.0 - rho) > 1e-9 else v[-1]
        unc = abs(lim2 - lim1) + 0.1 * abs(d[-1])
        return float(lim2), float(unc), True
    unc = 3.0 * float(np.max(np.abs(d[-3:])))
    if len(rhos):
        r = float(np.mean(np.abs(rhos)))
        if r >= 0.9:
            # tail still drifting; project the remaining drift instead of
            # pretending the last rung already sits on the limit
            proj = abs(d[-1]) * (r / (1.0 - r)) if r < 1.0 else math.inf
            unc = max(unc, min(proj, 40.0 * abs(d[-1])))
    return float(v[-1]), float(unc), False


def _tail_rungs(traj, n_min=5):
    s_hi = float(traj.grid[-1])
    floor = 8.0
    if len(traj.zeros):
        floor = max(floor, 1.5 * float(traj.zeros[-1]))
    ratio = 2.0 ** (1.0 / 3.0)
    rungs = []
    s = s_hi
    while s >= floor and len(rungs) < 40:
        rungs.append(s)
        s /= ratio
    if len(rungs) < n_min:
        raise WindowTooShort(
            f"only {len(rungs)} tail rungs between s={floor:.3g} and s_max={s_hi:.3g}")
    return np.array(rungs[::-1])


def classify_asymptotics(sol: InvertedSolution, params: ProblemParams | None = None,
                         tol: float = 1e-6) -> Classification:
    """Decide between the slow and fast tail behaviors and estimate limits.

    The two scales by regime (lambda1 = 1/alpha, lambda2 = 1/alpha-(N-2)/2):

      beta > 0:  slow -> nonzero constant, fast -> s^-lambda1
      beta = 0:  slow -> (log s)^(-1/alpha) times a fixed constant,
                 fast -> s^-lambda1
      beta < 0:  slow -> s^-lambda2, fast -> s^-lambda1
      N = 2:     lambda1 = lambda2 = lambda; slow -> s^-lambda log s,
                 fast -> s^-lambda
      N = 1:     lambda2 > lambda1; slow -> s^-lambda1, fast -> s^-lambda2

    Slow/fast coefficients are read instantaneously from (w, w') at geometric
    rungs, which projects out the complementary mode, then extrapolated.
    The beta < 0 slow limit is cross-checked against the variation-of-
    parameters quadrature; disagreement is reported as Undetermined.
    """
    traj = sol.traj if isinstance(sol, InvertedSolution) else sol
    if isinstance(sol, InvertedSolution) and "envelope" in sol.meta:
        census = envelope_zero_census(sol)
        est = LimitEstimate(0.0, math.inf, False, (float(traj.grid[-1]), float(traj.grid[-1])))
        return Classification(
            mode=AsymptoticMode.UNDETERMINED, Ltilde=est, Ltilde1=None,
            regime=derive_constants(traj.params if params is None else params).regime,
            diagnostics={"enveloped": True,
                         "amp_log10_at_s_max": census["amp_log10_hi"],
                         "note": "solution still oscillates at s_max; no tail to read"})
    if params is None:
        params = traj.params
    if traj.variable != Variable.INVERTED_S:
        raise WindowTooShort("classification expects an inverted-variable trajectory")
    dc = derive_constants(params)
    alpha = params.alpha
    l1, l2 = dc.lambda1, dc.lambda2

    if dc.regime == Regime.BETA_POS:
        # Trapping certificate: H is non-increasing past the virial switch
        # point, and a zero crossing needs H >= G(0) = 0.  Negative energy at
        # the window end therefore confines the tail to one potential well
        # for all later s, where the damping drives w to the well's critical
        # point sign(w) * beta^(1/alpha).  This reads the slow limit exactly
        # even while the trajectory still swings visibly around it.
        s_end = float(traj.grid[-1])
        spl0 = traj.spline()
        w_end = float(spl0(s_end))
        v_end = float(spl0.derivative()(s_end))
        h_end = 2.0 * s_end * s_end * v_end * v_end + float(
            G_potential(w_end, params))
        s_switch = 1.0 / (4.0 * (dc.gamma - 1.0))
        if s_end > s_switch and h_end < -1e-8:
            xstar = dc.beta ** (1.0 / alpha)
            val = math.copysign(xstar, w_end)
            est = LimitEstimate(val, 1e-9 * (1.0 + xstar), True,
                                (s_end, s_end))
            return Classification(
                mode=AsymptoticMode.SLOW, Ltilde=est, Ltilde1=None,
                regime=dc.regime,
                diagnostics={"trapped": True, "H_end": h_end,
                             "w_end": w_end,
                             "well_residual": abs(w_end - val)})

    try:
        rungs = _tail_rungs(traj)
    except WindowTooShort as exc:
        est = LimitEstimate(float(traj.values[-1]), math.inf, False,
                            (float(traj.grid[-1]), float(traj.grid[-1])))
        return Classification(
            mode=AsymptoticMode.UNDETERMINED, Ltilde=est, Ltilde1=None,
            regime=dc.regime,
            diagnostics={"note": str(exc)})
    spl = traj.spline()
    dspl = spl.derivative()
    w = spl(rungs)
    v = dspl(rungs)
    diags = {"rungs": rungs, "w_rungs": w, "s_wprime": rungs * v}

    def estimate(vals):
        scale = max(1.0, float(np.max(np.abs(vals))))
        val, unc, conv = _geometric_limit(vals, scale)
        return LimitEstimate(val, unc, conv, (float(rungs[0]), float(rungs[-1])))

    if dc.regime == Regime.BETA_POS:
        slow_vals = w
        fast_vals = (l2 * rungs ** l1 * w + rungs ** (l1 + 1.0) * v) / (l2 - l1)
    elif dc.regime == Regime.BETA_NEG or dc.regime == Regime.DIM_ONE:
        slow_l, fast_l = (l2, l1) if dc.regime == Regime.BETA_NEG else (l1, l2)
        slow_vals = ((l1 + l2 - slow_l) * rungs ** slow_l * w
                     + rungs ** (slow_l + 1.0) * v) / (l1 + l2 - 2.0 * slow_l)
        fast_vals = ((l1 + l2 - fast_l) * rungs ** fast_l * w
                     + rungs ** (fast_l + 1.0) * v) / (l1 + l2 - 2.0 * fast_l)
    elif dc.regime == Regime.DIM_TWO:
        lam = l1
        c2 = rungs ** (lam + 1.0) * v + lam * rungs ** lam * w
        c1 = rungs ** lam * w - c2 * np.log(rungs)
        slow_vals, fast_vals = c2, c1
        diags["drift_coefficient"] = float(np.max(np.abs(c2 - c2[-1]) * np.sqrt(rungs)))
    else:  # critical: in t = log s the scaled tail v = w t^(1/alpha) relaxes
        # along an attracting one-dimensional flow whose leading integral is
        # exactly v^-alpha = C^-alpha + c/t with C = (2/alpha)^(2/alpha).
        # Fitting c over the last rungs certifies that the trajectory sits on
        # that manifold and extrapolates it to t = infinity in one step.
        t = np.log(rungs)
        vsc = w * t ** (1.0 / alpha)
        Cz = (2.0 / alpha) ** (2.0 / alpha)
        kk = max(4, len(rungs) // 3)
        tt, vv = t[-kk:], vsc[-kk:]
        sgn = 1.0 if vv[-1] >= 0 else -1.0
        diags["v_scaled"] = vsc
        slow_est = None
        if np.all(sgn * vv > 0):
            cs = (np.abs(vv) ** (-alpha) - Cz ** (-alpha)) * tt
            c_fit = float(np.mean(cs))
            base = Cz ** (-alpha) + c_fit / tt
            if np.all(base > 0):
                model = sgn * base ** (-1.0 / alpha)
                resid = float(np.max(np.abs(model - vv)))
                # c-jitter across the window, translated to the limit value
                dlim = Cz ** (alpha + 1.0) / alpha * float(np.ptp(cs)) / float(tt[-1])
                if resid <= 0.05 * Cz:
                    diags["manifold_c"] = c_fit
                    slow_est = LimitEstimate(sgn * Cz, resid + dlim, True,
                                             (float(rungs[-kk]), float(rungs[-1])))
        if slow_est is None:
            val, unc, conv = _geometric_limit(vsc, max(1.0, float(np.max(np.abs(vsc)))))
            slow_est = LimitEstimate(val, unc, conv, (float(rungs[0]), float(rungs[-1])))
        fast_vals = rungs ** (l1 + 1.0) * v / (-l1)
        slow_vals = None

    if dc.regime != Regime.BETA_ZERO:
        slow_est = estimate(slow_vals)
    fast_est = estimate(fast_vals)

    floor_s = 1e-7 * max(1.0, abs(slow_est.value))
    floor_f = 1e-7 * max(1.0, abs(fast_est.value))
    slow_sig = abs(slow_est.value) > 3.0 * max(slow_est.uncertainty, floor_s)
    fast_sig = abs(fast_est.value) > 3.0 * max(fast_est.uncertainty, floor_f)

    if dc.regime == Regime.BETA_NEG:
        w1 = float(spl(1.0))
        v1 = float(dspl(1.0))
        c2_1 = (l1 * w1 + v1) / (l1 - l2)
        tau = np.geomspace(1.0, float(traj.grid[-1]), 4001)
        wt = spl(tau)
        Phi = dspl(tau) - _nonlin(alpha, wt)
        integral = float(_trapz(tau ** (l2 - 1.0) * Phi, tau))
        Lg = slow_est.value
        s_top = float(traj.grid[-1])
        remainder = -l2 * Lg / s_top
        if alpha * l2 > 0:
            remainder += -_nonlin(alpha, Lg) * s_top ** (-alpha * l2) / (alpha * l2)
        quad = c2_1 + (integral + remainder) / (2.0 * params.n - 4.0)
        diags["Ltilde_quadrature"] = quad
        # When the fast component is still large at s_max the ladder's rung
        # extrapolation can be biased by more than its internal spread, while
        # the quadrature identity keeps a controlled truncation remainder.
        # Their gap is therefore folded into the reported uncertainty, and
        # only a gross disagreement voids the classification.
        gap = abs(quad - slow_est.value)
        if slow_sig and gap > max(0.25 * abs(slow_est.value),
                                  25.0 * slow_est.uncertainty, 5e-3):
            diags["quadrature_mismatch"] = gap
            return Classification(AsymptoticMode.UNDETERMINED, slow_est, fast_est,
                                  dc.regime, diags)
        slow_est = LimitEstimate(slow_est.value,
                                 max(slow_est.uncertainty, gap),
                                 slow_est.converged, slow_est.window)
        slow_sig = abs(slow_est.value) > 3.0 * max(slow_est.uncertainty, floor_s)
        mask = traj.grid >= math.e
        ss = traj.grid[mask]
        diags["growth_sup"] = float(np.max(
            ss ** l2 * (np.abs(traj.values[mask]) + ss * np.abs(traj.derivs[mask]))
            / np.log(ss)))
    if dc.regime == Regime.DIM_TWO:
        lam = l1
        sg = traj.grid
        diags["growth_sup"] = float(np.max(
            (1.0 + sg) ** lam * (np.abs(traj.values) + (1.0 + sg) * np.abs(traj.derivs))
            / np.log(2.0 + sg)))

    if slow_sig:
        return Classification(AsymptoticMode.SLOW, slow_est, None, dc.regime, diags)
    if (not slow_sig) and fast_sig:
        # report the slow coefficient with its honest resolution floor
        slow_rep = LimitEstimate(slow_est.value,
                                 max(slow_est.uncertainty, abs(slow_est.value)),
                                 slow_est.converged, slow_est.window)
        return Classification(AsymptoticMode.FAST, slow_rep, fast_est, dc.regime, diags)
    return Classification(AsymptoticMode.UNDETERMINED, slow_est, fast_est, dc.regime, diags)


def invert_duality(traj: Trajectory) -> Trajectory:
    """Map a profile trajectory through s = r^-2, w = s^(-1/alpha) f(1/sqrt s).

    Works in both directions and is an exact involution on the overlap; the
    node at the image's singular point (r = 0 <-> s = infinity) is dropped.
    """
    params = traj.params
    alpha = params.alpha
    if traj.variable == Variable.RADIUS_R:
        mask = traj.grid > 0.0
        r = traj.grid[mask][::-1]
        f = traj.values[mask][::-1]
        fp = traj.derivs[mask][::-1]
        s = r ** (-2.0)
        w = r ** (2.0 / alpha) * f
        wp = -(1.0 / alpha) * s ** (-1.0 / alpha - 1.0) * f \
            - 0.5 * s ** (-1.0 / alpha - 1.5) * fp
        new_var = Variable.INVERTED_S
        zeros = traj.zeros[::-1] ** (-2.0) if len(traj.zeros) else np.array([])
        signs = -traj.zero_signs[::-1] if len(traj.zeros) else np.array([])
    elif traj.variable == Variable.INVERTED_S:
        mask = traj.grid > 0.0
        s = traj.grid[mask][::-1]
        wv = traj.values[mask][::-1]
        wp = traj.derivs[mask][::-1]
        r = s ** (-0.5)
        w = s ** (1.0 / alpha) * wv
        # f'(r) = -(2/alpha) r^(-2/alpha-1) w - 2 r^(-2/alpha-3) w'
        fp = -(2.0 / alpha) * r ** (-2.0 / alpha - 1.0) * wv \
            - 2.0 * r ** (-2.0 / alpha - 3.0) * wp
        s, w, wp = r, w, fp
        new_var = Variable.RADIUS_R
        zeros = traj.zeros[::-1] ** (-0.5) if len(traj.zeros) else np.array([])
        signs = -traj.zero_signs[::-1] if len(traj.zeros) else np.array([])
    else:
        raise DomainMismatch(f"unknown trajectory variable {traj.variable}")
    if len(s) < 2:
        raise DomainMismatch("fewer than two usable nodes away from the singular point")
    meta = {"duality": True}
    for key in ("a", "mu", "tol", "trivial", "odd"):
        if key in traj.meta:
            meta[key] = traj.meta[key]
    return Trajectory(variable=new_var, grid=s, values=w, derivs=wp,
                      zeros=zeros, zero_signs=signs, params=params, meta=meta)
