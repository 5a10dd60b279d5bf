"""Root finding across the shooting families.

Thresholds a_m and mu_m, the equal-limit pair branches, the singular-branch
selection, the dimension-one even/odd pairs, and an atlas sweep that records
everything to JSON/CSV.  All roots come from bisection against integer zero
counts or against the continuous limit maps L, L1, Ltilde; every returned
point is re-validated by a fresh integration at the returned shoot value.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from .errors import (
    BracketNotFound,
    PeakBelowTarget,
    RegimeMismatch,
    UndeterminedClassification,
)
from .params import ProblemParams, Regime, derive_constants
from .profile import (
    count_zeros_odd,
    count_zeros_profile,
    integrate_odd_profile,
    integrate_profile,
    shoot_odd_profile,
    shoot_profile,
)
from .inverted import (
    AsymptoticMode,
    classify_asymptotics,
    default_s_max,
    energy_H,
    envelope_zero_census,
    solve_inverted,
)


class BranchKind(str, Enum):
    AM = "Am"
    MU_M = "MuM"
    A_PLUS = "APlus"
    A_MINUS = "AMinus"
    B_PLUS = "BPlus"
    B_MINUS = "BMinus"
    MU_BAR_SINGULAR = "MuBarSingular"
    DIM1_C_PLUS = "Dim1CPlus"
    DIM1_C_MINUS = "Dim1CMinus"
    DIM1_D_PLUS = "Dim1DPlus"
    DIM1_D_MINUS = "Dim1DMinus"


@dataclass
class BranchPoint:
    kind: BranchKind
    shoot: float
    limit: float
    zero_count: int
    residuals: dict = field(default_factory=dict)
    target_mu: float | None = None
    bracket: tuple[float, float] | None = None

    def to_json_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def _count_L(a, params, plateau_tol=1e-8):
    traj, est = shoot_profile(a, params, plateau_tol=plateau_tol)
    return count_zeros_profile(traj), est, traj


def _count_L1(b, params, plateau_tol=1e-8):
    traj, est = shoot_odd_profile(b, params, plateau_tol=plateau_tol)
    return count_zeros_odd(traj), est, traj


def _count_only(x, params, odd_family=False):
    """Zero count alone, one integration pass, no limit extrapolation.

    Counts are complete at the default window: past the oscillatory range
    the profile is a power tail plus a Gaussian remainder, so a crossover
    zero can hide beyond it only when |L| is far below anything the searches
    resolve.
    """
    if odd_family:
        return count_zeros_odd(integrate_odd_profile(x, params, tol=1e-9))
    return count_zeros_profile(integrate_profile(x, params, tol=1e-9))


def _count_edge(m, params, odd_family=False, hint=None, rel_width=1e-7):
    """Bracket (lo, hi) around inf{a : N(a) >= m+1} by pure count bisection."""
    if hint is not None:
        lo, hi = float(hint[0]), float(hint[1])
    else:
        lo, hi = 0.25, 4.0
    n_lo = _count_only(lo, params, odd_family)
    for _ in range(60):
        if n_lo <= m:
            break
        hi = lo
        lo *= 0.5
        n_lo = _count_only(lo, params, odd_family)
    else:
        raise BracketNotFound(f"no lower end with count <= {m} above a = {lo:.3g}")
    n_hi = _count_only(hi, params, odd_family)
    for _ in range(60):
        if n_hi >= m + 1:
            break
        hi *= 2.0
        n_hi = _count_only(hi, params, odd_family)
    else:
        raise BracketNotFound(f"count never reached {m + 1} below a = {hi:.3g}")
    while hi - lo > rel_width * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _count_only(mid, params, odd_family) >= m + 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


def find_am(m: int, params: ProblemParams, a_hint_bracket=None, tol: float = 1e-6,
            odd_family: bool = False) -> BranchPoint:
    """Threshold a_m = inf{a : N(a) >= m+1}, where L vanishes and N(a_m) = m.

    Bisection against the integer count, polished until |L| at the returned
    shoot meets tol; the point carries the final bracket and the measured L.
    With odd_family=True the same ladder runs over the odd shooting
    parameter b (dimension one).
    """
    if m < 0:
        raise ValueError("m must be a nonnegative integer")
    counter = _count_L1 if odd_family else _count_L
    lo, hi = _count_edge(m, params, odd_family, hint=a_hint_bracket)
    n_lo, est_lo, _ = counter(lo, params)
    L_lo = est_lo.value
    for _ in range(60):
        if n_lo == m and abs(L_lo) <= tol:
            break
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if _count_only(mid, params, odd_family) >= m + 1:
            hi = mid
        else:
            lo = mid
            n_lo, est_lo, _ = counter(lo, params)
            L_lo = est_lo.value

    n_check, est_check, _ = counter(lo, params)
    return BranchPoint(
        kind=BranchKind.AM,
        shoot=lo,
        limit=est_check.value,
        zero_count=n_check,
        residuals={
            "L_abs": abs(est_check.value),
            "L_uncertainty": est_check.uncertainty,
            "bracket_width": hi - lo,
            "revalidated_count": n_check,
            "odd_family": odd_family,
        },
        bracket=(lo, hi),
    )


def _settled_count(mu, params, s_max=None, rounds=4):
    """Zero count of w_mu with the far tail accounted for; may exceed the
    enumerated count by one.

    For beta > 0 the energy H is eventually non-increasing and the origin is
    the top of the potential barrier, so H < 0 at the end of the window
    certifies the trajectory is trapped in one well and cannot cross zero
    again; the enumeration is then complete.  The oscillation is logarithmic
    in s there, which keeps the cost of a very deep window flat, so the
    first attempt already integrates to s = 1e12 and extensions multiply by
    1e4.

    Elsewhere two windows a factor 100 apart must agree on the enumerated
    count, and the far tail is read from the classification: when the sign
    of the dominant limit disagrees with the sign the trajectory holds after
    its last enumerated zero, the two-scale tail changes sign exactly once
    more beyond the window, so one crossover zero is added.  An indecisive
    (insignificant) limit adds nothing, which biases thresholds detected
    through this count by no more than the width of the indecision zone.
    Returns (count, sol, classification).
    """
    dc = derive_constants(params)
    if dc.regime == Regime.BETA_POS:
        s = max(default_s_max(params), 1e12) if s_max is None else float(s_max)
        growth = 1e4
    else:
        s = default_s_max(params) if s_max is None else float(s_max)
        growth = 100.0
    prev = None
    sol = None
    for _ in range(rounds):
        sol = solve_inverted(mu, params, s_max=s)
        if "envelope" in sol.meta:
            raise UndeterminedClassification(
                f"mu = {mu:.6g} hands off to the amplitude envelope; "
                "exact zero counts need a smaller mu")
        n = len(sol.traj.zeros)
        if dc.regime == Regime.BETA_POS:
            h_end = float(energy_H(sol, np.array([sol.traj.grid[-1]]))[0])
            if h_end < 0.0:
                return n, sol, classify_asymptotics(sol)
        elif prev is not None and n == prev:
            cls = classify_asymptotics(sol)
            dom = cls.Ltilde if cls.mode == AsymptoticMode.SLOW else cls.Ltilde1
            extra = 0
            if (dom is not None
                    and abs(dom.value) > 3.0 * dom.uncertainty
                    and math.copysign(1.0, dom.value) != (-1.0) ** n):
                extra = 1
            return n + extra, sol, cls
        prev = n
        s *= growth
    raise UndeterminedClassification(
        f"zero count of mu = {mu:.6g} did not settle by s_max = {s / growth:.3g}")


def _count_at_least(mu, params, m_plus_1):
    """Whether the settled count reaches m_plus_1, tolerating envelope members.

    Zeros already enumerated on a short window are a lower bound on the
    settled count, so the expensive trapped-tail confirmation only runs when
    the short window stays below the target.  A hand-off to the amplitude
    envelope likewise bounds the count from below through the census.
    """
    sol = solve_inverted(mu, params)
    n_short = len(sol.traj.zeros)
    if "envelope" in sol.meta:
        census = envelope_zero_census(sol)
        n_short += int(10.0 ** min(18.0, census["count_log10"]))
    if n_short >= m_plus_1:
        return True, None
    n, _, _ = _settled_count(mu, params)
    return n >= m_plus_1, n


def _mu_count_threshold(m, params, lo=None, hi=None, rel_width=1e-6):
    """inf{mu : settled count >= m+1} by bisection."""
    lo = 1.0 if lo is None else float(lo)
    n_lo, _, _ = _settled_count(lo, params)
    if n_lo > m:
        raise BracketNotFound(
            f"count at mu = {lo:.6g} is already {n_lo} > {m}")
    if hi is None:
        hi = max(2.0, 2.0 * lo)
        for _ in range(60):
            ok, _ = _count_at_least(hi, params, m + 1)
            if ok:
                break
            hi *= 2.0
        else:
            raise BracketNotFound(f"count never reached {m + 1} below mu = {hi:.3g}")
    while hi - lo > rel_width * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        ok, n_mid = _count_at_least(mid, params, m + 1)
        if ok:
            hi = mid
        else:
            lo, n_lo = mid, n_mid
    return 0.5 * (lo + hi), lo, hi, n_lo


def find_mu_m(m: int, params: ProblemParams, tol: float = 1e-6) -> BranchPoint:
    """Threshold mu_m: the count reaches m+1 and the slow limit vanishes.

    Requires m >= m_bar = (count at mu=2) + 1.  At the returned point the
    classification must come out Fast; Undetermined verdicts retry with a
    doubled window up to three times before failing loudly.
    """
    n2, _, _ = _settled_count(2.0, params)
    m_bar = n2 + 1
    if m < m_bar:
        raise BracketNotFound(
            f"m = {m} is below m_bar = {m_bar} (count at mu = 2 is {n2})")
    mu, lo, hi, n_lo = _mu_count_threshold(m, params, lo=2.0, rel_width=tol)

    cls = None
    s = None
    for _ in range(3):
        sol = solve_inverted(lo, params, s_max=s)
        cls = classify_asymptotics(sol)
        if cls.mode != AsymptoticMode.UNDETERMINED:
            break
        s = 2.0 * float(sol.traj.grid[-1])
    if cls.mode == AsymptoticMode.UNDETERMINED:
        raise UndeterminedClassification(
            f"classification at mu_m = {lo:.8g} stayed undetermined")
    lt1 = cls.Ltilde1.value if cls.Ltilde1 is not None else math.nan
    return BranchPoint(
        kind=BranchKind.MU_M,
        shoot=lo,
        limit=lt1,
        zero_count=n_lo,
        residuals={
            "Ltilde_abs": abs(cls.Ltilde.value),
            "Ltilde_uncertainty": cls.Ltilde.uncertainty,
            "mode": cls.mode.value,
            "bracket_width": hi - lo,
        },
        bracket=(lo, hi),
    )


def _base_count(params, odd_family=False):
    """Zero count in the small-shoot (near-linear) limit of the family."""
    return _count_only(1e-3, params, odd_family)


def _interval_of_count(n_target, params, odd_family=False):
    """The open shoot interval on which the count equals n_target.

    Counts start from the near-linear value of the family (not always zero:
    the even family in dimension one already crosses once for tiny shoots),
    so the interval's left end is the axis when n_target is the base count.
    """
    n0 = _base_count(params, odd_family)
    if n_target < n0:
        raise BracketNotFound(
            f"the family already has {n0} zeros for small shoots; "
            f"no count-{n_target} interval exists")
    if n_target == n0:
        left = 0.0
    else:
        left = _count_edge(n_target - 1, params, odd_family)[1]
    right = _count_edge(n_target, params, odd_family,
                        hint=(max(left, 0.25), max(4.0, 2 * left)))[0]
    if not right > left:
        raise BracketNotFound(
            f"degenerate count-{n_target} interval [{left:.6g}, {right:.6g}]")
    return left, right


def _limit_on(x, params, odd_family, plateau_tol=1e-6):
    counter = _count_L1 if odd_family else _count_L
    _, est, _ = counter(x, params, plateau_tol=plateau_tol)
    return est.value


def _peak_and_roots(left, right, target, params, tol, odd_family=False,
                    sign=1.0, grid_n=17):
    """Two roots of sign*L = target > 0 on (left, right), around the peak.

    Scan and peak refinement run at a relaxed limit tolerance; only the root
    bisections read L to full precision through the stop test.
    """
    pad = 0.02 * (right - left)
    xs = np.linspace(left + pad, right - pad, grid_n)
    vals = np.array([sign * _limit_on(float(x), params, odd_family) for x in xs])
    k = int(np.argmax(vals))
    # refine the peak with a short golden-section pass
    glo = xs[max(0, k - 1)]
    ghi = xs[min(grid_n - 1, k + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = ghi - invphi * (ghi - glo)
    d = glo + invphi * (ghi - glo)
    fc = sign * _limit_on(float(c), params, odd_family)
    fd = sign * _limit_on(float(d), params, odd_family)
    for _ in range(12):
        if fc < fd:
            glo, c, fc = c, d, fd
            d = glo + invphi * (ghi - glo)
            fd = sign * _limit_on(float(d), params, odd_family)
        else:
            ghi, d, fd = d, c, fc
            c = ghi - invphi * (ghi - glo)
            fc = sign * _limit_on(float(c), params, odd_family)
    x_peak = 0.5 * (glo + ghi)
    peak = max(float(np.max(vals)), fc, fd)
    if peak <= target:
        raise PeakBelowTarget(
            f"max of the limit on ({left:.6g}, {right:.6g}) is {peak:.6g} "
            f"< target {target:.6g}")

    def h(x):
        return sign * _limit_on(float(x), params, odd_family,
                                plateau_tol=min(1e-6, 0.1 * tol)) - target

    def bisect_root(xa, xb):
        fa, fb = h(xa), h(xb)
        if fa == 0.0:
            return xa
        if fb == 0.0:
            return xb
        if fa * fb > 0:
            raise BracketNotFound(
                f"no sign change of L - target on [{xa:.6g}, {xb:.6g}]")
        for _ in range(200):
            xm = 0.5 * (xa + xb)
            fm = h(xm)
            if abs(fm) <= tol:
                return xm
            if fa * fm <= 0:
                xb, fb = xm, fm
            else:
                xa, fa = xm, fm
        raise BracketNotFound("limit bisection exhausted its iteration budget")

    lo_root = bisect_root(left + pad, x_peak)
    hi_root = bisect_root(x_peak, right - pad)
    return lo_root, hi_root, peak


def theorem1_branches(mu_target: float, m: int, params: ProblemParams,
                      tol: float = 1e-6, odd: bool = False):
    """The equal-limit pair on the 2m-count interval (odd: 2m+1, sign-flipped).

    Returns (minus, plus) BranchPoints with L = mu_target and the stated zero
    count.  The odd variant finds the pair with L = -mu_target on the odd
    interval and flips the shoot sign, which negates the profile and its
    limit while keeping the zero count.
    """
    if mu_target <= 0:
        raise ValueError("mu_target must be positive")
    n_target = 2 * m + (1 if odd else 0)
    left, right = _interval_of_count(n_target, params)
    sign = -1.0 if odd else 1.0
    lo_root, hi_root, peak = _peak_and_roots(
        left, right, mu_target, params, tol, sign=sign)

    def pack(x, kind):
        shoot = -x if odd else x
        n, est, _ = _count_L(shoot, params)
        return BranchPoint(
            kind=kind,
            shoot=shoot,
            limit=est.value,
            zero_count=n,
            residuals={
                "L_error": abs(est.value - mu_target),
                "L_uncertainty": est.uncertainty,
                "interval_peak": peak,
                "revalidated_count": n,
            },
            target_mu=mu_target,
            bracket=(left, right),
        )

    if odd:
        # b_pm = -btilde_mp: the flip reverses the ordering
        minus = pack(hi_root, BranchKind.B_MINUS)
        plus = pack(lo_root, BranchKind.B_PLUS)
    else:
        minus = pack(lo_root, BranchKind.A_MINUS)
        plus = pack(hi_root, BranchKind.A_PLUS)
    return minus, plus


def first_feasible_m(mu_target: float, params: ProblemParams, tol: float = 1e-6,
                     m_max: int = 12, odd: bool = False):
    """Smallest m whose interval peak of |L| exceeds mu_target, with the pair."""
    last_exc = None
    for m in range(m_max + 1):
        try:
            return m, theorem1_branches(mu_target, m, params, tol=tol, odd=odd)
        except (PeakBelowTarget, BracketNotFound) as exc:
            last_exc = exc
    raise PeakBelowTarget(
        f"no feasible m <= {m_max} for target {mu_target:.6g}: {last_exc}")


def _singular_law(params, s_probe):
    """(s_probe, |target|, law reader) for the slow singular-origin law."""
    dc = derive_constants(params)
    alpha = params.alpha
    if dc.regime == Regime.BETA_POS:
        sp = 1e4 if s_probe is None else float(s_probe)
        target_abs = dc.beta ** (1.0 / alpha)

        def law(sol):
            return float(sol.traj.spline()(sp))
    else:
        sp = 1e6 if s_probe is None else float(s_probe)
        target_abs = (2.0 / alpha) ** (2.0 / alpha)
        scale = math.log(sp) ** (1.0 / alpha)

        def law(sol):
            return float(sol.traj.spline()(sp)) * scale

    return sp, target_abs, law


def singular_branch(m: int | None, params: ProblemParams, tol: float = 1e-3,
                    s_probe: float | None = None, mu_stop: float = 8.0,
                    scan_step: float = 0.01):
    """Slow-decay member mu_bar whose dual shows the singular law at the probe.

    As mu increases the zeros of w_mu sweep downward past any fixed location,
    so the probed value w_mu(s_probe) oscillates in mu and crosses the law
    target many times.  Crossings are taken in increasing mu; one is accepted
    when its settled zero count mc has the matching sign (-1)^mc at the
    target and the tail is certified slow, which makes the limit exactly
    (-1)^mc beta^(1/alpha) there (log-corrected constant when beta = 0).
    With m = None the first acceptable crossing wins ("first feasible m");
    otherwise crossings are consumed until one sits in the count-m plateau,
    and counts jumping past m is an error.  Returns (BranchPoint, solution);
    the dual profile is invert_duality(sol.traj).
    """
    dc = derive_constants(params)
    if dc.regime not in (Regime.BETA_POS, Regime.BETA_ZERO):
        raise RegimeMismatch(
            "the singular branch needs beta >= 0 (N >= 3, alpha >= 2/(N-2))")
    sp, target_abs, law = _singular_law(params, s_probe)
    solve_hi = max(4.0 * sp, default_s_max(params))

    def probe(mu):
        sol = solve_inverted(mu, params, s_max=solve_hi)
        if "envelope" in sol.meta:
            return None
        return law(sol)

    def accept(mu_root, t_sign):
        try:
            mc, sol, cls = _settled_count(mu_root, params)
        except UndeterminedClassification:
            return None
        if (-1.0) ** mc != t_sign:
            return None
        if cls.mode != AsymptoticMode.SLOW:
            return None
        return mc, sol, cls

    skipped = []
    mu_prev = 1.0
    val_prev = probe(mu_prev)
    mu = mu_prev
    while mu < mu_stop and val_prev is not None:
        mu = mu_prev + scan_step
        val = probe(mu)
        if val is None:
            break
        for t_sign in (1.0, -1.0):
            t = t_sign * target_abs
            if (val_prev - t) * (val - t) >= 0:
                continue
            xa, xb, fa = mu_prev, mu, val_prev - t
            root = None
            for _ in range(80):
                xm = 0.5 * (xa + xb)
                vm = probe(xm)
                if vm is None:
                    break
                fm = vm - t
                if abs(fm) <= 0.5 * tol:
                    root = xm
                    break
                if fa * fm <= 0:
                    xb = xm
                else:
                    xa, fa = xm, fm
            if root is None:
                continue
            got = accept(root, t_sign)
            if got is None:
                skipped.append(root)
                continue
            mc, sol, cls = got
            if m is not None and mc < m:
                continue
            if m is not None and mc > m:
                raise BracketNotFound(
                    f"counts jumped past m = {m}: the first parity-matching "
                    f"crossing above it has count {mc} at mu = {root:.8g}")
            law_err = abs(law(sol) - (-1.0) ** mc * target_abs)
            return (
                BranchPoint(
                    kind=BranchKind.MU_BAR_SINGULAR,
                    shoot=root,
                    limit=cls.Ltilde.value,
                    zero_count=mc,
                    residuals={
                        "law_error_at_probe": law_err,
                        "probe_s": sp,
                        "w0_residual": sol.meta["w0_residual"],
                        "skipped_crossings": len(skipped),
                    },
                    bracket=(mu_prev, mu),
                ),
                sol,
            )
        mu_prev, val_prev = mu, val
    raise BracketNotFound(
        f"no acceptable law crossing for mu in [1, {mu:.4g}] "
        f"({len(skipped)} crossings failed validation)")


def dim1_branches(mu_target: float, m: int, params: ProblemParams,
                  tol: float = 1e-6):
    """Even and odd equal-limit pairs in dimension one.

    Even pairs shoot from f(0) = a, f'(0) = 0 with m zeros on the half line
    (2m zeros once extended evenly); odd pairs shoot from f(0) = 0,
    f'(0) = b with m zeros on (0, inf) (2m+1 zeros extended oddly).  When the
    interval parity gives the limit the wrong sign the pair is found on the
    mirrored profile and the shoot sign is flipped back.
    """
    if params.n != 1:
        raise RegimeMismatch("dimension-one branches need n = 1")
    if mu_target <= 0:
        raise ValueError("mu_target must be positive")
    out = {}
    parity_sign = (-1.0) ** m

    left, right = _interval_of_count(m, params)
    lo_root, hi_root, peak = _peak_and_roots(
        left, right, mu_target, params, tol, sign=parity_sign)
    flip = parity_sign < 0

    def pack_even(x, kind):
        shoot = -x if flip else x
        n, est, _ = _count_L(shoot, params)
        return BranchPoint(
            kind=kind, shoot=shoot, limit=est.value, zero_count=n,
            residuals={"L_error": abs(est.value - mu_target),
                       "interval_peak": peak, "flipped": flip},
            target_mu=mu_target, bracket=(left, right))

    out["even"] = (pack_even(lo_root, BranchKind.A_MINUS),
                   pack_even(hi_root, BranchKind.A_PLUS))

    left1, right1 = _interval_of_count(m, params, odd_family=True)
    lo1, hi1, peak1 = _peak_and_roots(
        left1, right1, mu_target, params, tol, odd_family=True,
        sign=parity_sign)

    def pack_odd(x, kind):
        shoot = -x if flip else x
        n, est, _ = _count_L1(shoot, params)
        return BranchPoint(
            kind=kind, shoot=shoot, limit=est.value, zero_count=n,
            residuals={"L1_error": abs(est.value - mu_target),
                       "interval_peak": peak1, "flipped": flip},
            target_mu=mu_target, bracket=(left1, right1))

    out["odd"] = (pack_odd(lo1, BranchKind.DIM1_C_MINUS),
                  pack_odd(hi1, BranchKind.DIM1_C_PLUS))

    def pack_odd_neg(x, kind):
        # the -mu_target family is the mirror image of the +mu_target one
        shoot = x if flip else -x
        n, est, _ = _count_L1(shoot, params)
        return BranchPoint(
            kind=kind, shoot=shoot, limit=est.value, zero_count=n,
            residuals={"L1_error": abs(est.value + mu_target),
                       "interval_peak": peak1, "flipped": not flip},
            target_mu=mu_target, bracket=(left1, right1))

    out["odd_neg"] = (pack_odd_neg(lo1, BranchKind.DIM1_D_MINUS),
                      pack_odd_neg(hi1, BranchKind.DIM1_D_PLUS))
    return out


def _thread_count():
    raw = os.environ.get("SSHEAT_THREADS", "")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return max(1, k) if k else min(4, os.cpu_count() or 1)


def build_atlas(params: ProblemParams, mmax: int, mu_targets=None,
                tol: float = 1e-6, json_path=None, csv_path=None):
    """Sweep thresholds and pair branches; return (atlas dict, csv rows).

    The bifurcation table samples (a, L(a), N(a)) across the swept range.
    Findings that a regime does not support are recorded under "errors"
    rather than silently dropped.
    """
    mu_targets = [1.0] if mu_targets is None else list(mu_targets)
    atlas = {
        "params": {"n": params.n, "alpha": params.alpha},
        "a_m": [],
        "pairs": {},
        "errors": {},
    }
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        futures = {m: pool.submit(find_am, m, params, None, tol)
                   for m in range(mmax + 1)}
        for m in range(mmax + 1):
            try:
                atlas["a_m"].append(futures[m].result().to_json_dict())
            except Exception as exc:  # recorded, not raised: partial atlases are useful
                atlas["errors"][f"a_{m}"] = f"{type(exc).__name__}: {exc}"

    for mu in mu_targets:
        try:
            m_found, (bm, bp) = first_feasible_m(mu, params, tol=tol,
                                                 m_max=max(2, mmax // 2))
            atlas["pairs"][f"mu_{mu:.6g}"] = {
                "m": m_found,
                "minus": bm.to_json_dict(),
                "plus": bp.to_json_dict(),
            }
        except Exception as exc:
            atlas["errors"][f"pair_mu_{mu:.6g}"] = f"{type(exc).__name__}: {exc}"

    a_vals = [bp["shoot"] for bp in atlas["a_m"]]
    hi = 1.25 * max(a_vals) if a_vals else 8.0
    grid = np.linspace(0.05, hi, 160)
    rows = []
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        results = pool.map(lambda a: _count_L(float(a), params), grid)
        for a, (n, est, _) in zip(grid, results):
            rows.append((float(a), est.value, n))

    if json_path:
        with open(json_path, "w") as fh:
            json.dump(atlas, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write("a,L,N\n")
            for a, L, n in rows:
                fh.write(f"{a:.17g},{L:.17g},{n:d}\n")
    return atlas, rows
