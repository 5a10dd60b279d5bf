"""Problem parameters and the closed-form constants derived from them.

The underlying PDE is u_t = Lap(u) + |u|^alpha * u on R^N.  Backward
self-similar solutions u(t,x) = t^(-1/alpha) f(x/sqrt(t)) lead to the radial
profile equation

    f'' + ((N-1)/r + r/2) f' + f/alpha + |f|^alpha f = 0,

and the substitution w(s) = s^(-1/alpha) f(1/sqrt(s)) to the inverted
equation

    4 s^2 w'' + 4 gamma s w' - w' - beta w + |w|^alpha w = 0,

with

    beta  = (2/alpha) (N - 2 - 2/alpha),
    gamma = 2/alpha - (N - 4)/2,
    lambda1 = 1/alpha,   lambda2 = 1/alpha - (N-2)/2,

satisfying beta = -4 lambda1 lambda2 and gamma = 1 + lambda1 + lambda2.
The sign of beta (for N >= 3), or the dimension itself (N = 1, 2), fixes
which asymptotic machinery applies; that tag is the `regime`.

Two closed-form scalars are exposed beyond the constants themselves:

* mu_zero: the threshold coefficient for the homogeneous initial value
  mu |x|^(-2/alpha), given by
  1/mu0 = alpha^(1/alpha) 2^(-2/alpha) pi^(-N/2) Int e^(-|y|^2) |y|^(-2/alpha) dy.
* iota_bound: the explicit six-interval bound on the length of any
  sign-preserving interval of w_mu inside (0, b_window), valid once mu
  clears both largeness thresholds mu_frd1, mu_frd8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy import integrate
from scipy import special

from .errors import BelowThreshold, NonIntegrable

__all__ = [
    "Regime",
    "ProblemParams",
    "DerivedConstants",
    "derive_constants",
    "mu_zero",
    "iota_bound",
]


class Regime(str, Enum):
    """Asymptotic regime tag: sign of beta for N >= 3, else the dimension."""

    BETA_NEG = "BetaNeg"
    BETA_ZERO = "BetaZero"
    BETA_POS = "BetaPos"
    DIM_TWO = "DimTwo"
    DIM_ONE = "DimOne"


@dataclass(frozen=True)
class ProblemParams:
    """Dimension N and nonlinearity power alpha; subcritical (N-2)*alpha < 4."""

    n: int
    alpha: float

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n!r}")
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a finite number, got {self.alpha!r}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))
        if (self.n - 2) * self.alpha >= 4:
            raise ValueError(
                f"(N-2)*alpha = {(self.n - 2) * self.alpha} >= 4; "
                "only the subcritical range is supported"
            )


@dataclass(frozen=True)
class DerivedConstants:
    """Every closed-form scalar the analysis derives from (N, alpha).

    mu_frd1 and mu_frd8 are the two largeness thresholds under which the
    oscillation bound iota_bound is proved: mu must exceed
    2*(2(alpha+2)|beta|)^(1/alpha) strictly and 2^(1+4/alpha) weakly.
    """

    params: ProblemParams
    beta: float
    gamma: float
    lambda1: float
    lambda2: float
    b_window: float
    regime: Regime
    mu_frd1: float
    mu_frd8: float


def derive_constants(params: ProblemParams) -> DerivedConstants:
    """Compute beta, gamma, lambda1, lambda2, the oscillation window and regime."""
    n, alpha = params.n, params.alpha
    lambda1 = 1.0 / alpha
    lambda2 = 1.0 / alpha - (n - 2) / 2.0

    if n == 1:
        regime = Regime.DIM_ONE
    elif n == 2:
        regime = Regime.DIM_TWO
    else:
        # Classify on the algebraic comparison (N-2)*alpha vs 2 rather than on
        # the rounded value of beta, so alpha = 2/(N-2) lands exactly on zero.
        crit = (n - 2) * alpha - 2.0
        if abs(crit) <= 1e-14 * max(1.0, alpha):
            regime = Regime.BETA_ZERO
            lambda2 = 0.0  # snap: alpha was meant as exactly 2/(N-2)
        elif crit > 0:
            regime = Regime.BETA_POS
        else:
            regime = Regime.BETA_NEG

    # Build beta and gamma from the lambdas so the product and sum identities
    # hold exactly in floating point, not merely to rounding.
    beta = -4.0 * lambda1 * lambda2
    gamma = 1.0 + lambda1 + lambda2

    b_window = 1.0 / (4.0 * gamma + 8.0)
    mu_frd1 = 2.0 * (2.0 * (alpha + 2.0) * abs(beta)) ** (1.0 / alpha)
    mu_frd8 = 2.0 ** (1.0 + 4.0 / alpha)
    return DerivedConstants(
        params=params,
        beta=beta,
        gamma=gamma,
        lambda1=lambda1,
        lambda2=lambda2,
        b_window=b_window,
        regime=regime,
        mu_frd1=mu_frd1,
        mu_frd8=mu_frd8,
    )


def _gaussian_radial_moment(p: float) -> float:
    """Int_0^inf e^(-rho^2) rho^p drho by adaptive quadrature, p > -1.

    The substitution rho = u^2 removes the endpoint singularity (the
    transformed exponent 2p+1 is > -1 whenever p > -1).
    """
    q = 2.0 * p + 1.0
    val, err = integrate.quad(
        lambda u: 2.0 * math.exp(-u ** 4) * u ** q if u > 0 else 0.0,
        0.0,
        math.inf,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    return val


def mu_zero(params: ProblemParams) -> float:
    """Threshold coefficient mu0 for the homogeneous trace mu*|x|^(-2/alpha).

    Evaluated by adaptive radial quadrature and cross-checked against the
    Gamma closed form Gamma(N/2) 2^(2/alpha) alpha^(-1/alpha) / Gamma(N/2 - 1/alpha)
    to 1e-10 relative.  Raises NonIntegrable when alpha <= 2/N.
    """
    n, alpha = params.n, params.alpha
    if alpha * n <= 2.0:
        raise NonIntegrable(
            f"alpha = {alpha} <= 2/N = {2.0 / n}; |x|^(-2/alpha) not locally integrable"
        )
    # 1/mu0 = alpha^(1/alpha) 2^(-2/alpha) pi^(-N/2) * omega_{N-1} * I,
    # omega_{N-1} = 2 pi^(N/2)/Gamma(N/2),  I = Int_0^inf e^(-rho^2) rho^(N-1-2/alpha).
    moment = _gaussian_radial_moment(n - 1.0 - 2.0 / alpha)
    inv = alpha ** (1.0 / alpha) * 2.0 ** (-2.0 / alpha) * 2.0 * moment / special.gamma(n / 2.0)
    value = 1.0 / inv
    closed = (
        special.gamma(n / 2.0)
        * 2.0 ** (2.0 / alpha)
        * alpha ** (-1.0 / alpha)
        / special.gamma(n / 2.0 - 1.0 / alpha)
    )
    if abs(value - closed) > 1e-10 * abs(closed):
        raise ArithmeticError(
            f"mu_zero quadrature {value!r} disagrees with closed form {closed!r}"
        )
    return value


def _well_transit_integral(alpha: float) -> float:
    """Q = Int_0^1 (1 - z^(alpha+2))^(-1/2) dz by quadrature.

    Substituting z = 1 - v^2 turns the inverse-square-root endpoint into a
    bounded smooth integrand.
    """
    p = alpha + 2.0

    def f(v):
        if v <= 0.0:
            return 2.0 / math.sqrt(p)
        if v >= 1.0:
            return 2.0
        return 2.0 * v / math.sqrt(1.0 - (1.0 - v * v) ** p)

    val, err = integrate.quad(f, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def iota_bound(params: ProblemParams, mu: float) -> float:
    """Upper bound on the length of any sign-preserving interval in (0, b_window).

    Sum of the six closed-form interval estimates; valid for mu strictly above
    mu_frd1 and at least mu_frd8, else BelowThreshold is raised.
    """
    dc = derive_constants(params)
    if not (mu > dc.mu_frd1 and mu >= dc.mu_frd8):
        raise BelowThreshold(
            f"mu = {mu} must exceed mu_frd1 = {dc.mu_frd1} strictly "
            f"and mu_frd8 = {dc.mu_frd8}"
        )
    alpha = params.alpha
    b = dc.b_window
    q = _well_transit_integral(alpha)
    half = mu ** (-alpha / 2.0)
    # Rising and falling outer pieces (two identical bounds), the near-peak
    # piece, the two convexity-split pieces, and the central descent piece.
    return (
        2.0 * b * math.sqrt(2.0 * (alpha + 2.0)) * half
        + (2.0 ** (alpha + 1.0) / alpha) * mu ** (-alpha)
        + (2.0 ** (1.0 + alpha / 2.0) / alpha) * half
        + 2.0 ** (4.0 + alpha / 2.0) * b * b * half
        + 2.0 ** (1.0 + alpha / 2.0) * b * math.sqrt(alpha + 2.0) * q * half
    )
