"""Self-similar profiles of the focusing nonlinear heat equation.

Shooting on the radial profile equation, a stable fixed-point construction
for the inverted equation, branch cataloging, and direct PDE cross-checks.
"""

from .errors import (
    BelowThreshold,
    BlowupDetected,
    BracketNotFound,
    ContractionFailed,
    DomainMismatch,
    ExtrapolationWarning,
    NonIntegrable,
    PeakBelowTarget,
    RegimeMismatch,
    RootFindDiverged,
    SSHeatError,
    StepSizeUnderflow,
    UndeterminedClassification,
    WindowTooShort,
)
from .params import (
    DerivedConstants,
    ProblemParams,
    Regime,
    derive_constants,
    iota_bound,
    mu_zero,
)
from .profile import (
    LimitEstimate,
    Trajectory,
    Variable,
    count_zeros_odd,
    count_zeros_profile,
    estimate_L,
    estimate_L1_odd,
    integrate_odd_profile,
    integrate_profile,
    profile_rhs,
    shoot_odd_profile,
    shoot_profile,
)
from .inverted import (
    AsymptoticMode,
    Classification,
    G_potential,
    InvertedSolution,
    classify_asymptotics,
    count_zeros_inverted,
    default_s_max,
    energy_H,
    envelope_zero_census,
    g_nonlinearity,
    invert_duality,
    riccati_monitors,
    solve_inverted,
)
from .branches import (
    BranchKind,
    BranchPoint,
    build_atlas,
    dim1_branches,
    find_am,
    find_mu_m,
    first_feasible_m,
    singular_branch,
    theorem1_branches,
)
from .pde import (
    BoundaryKind,
    RadialField,
    distributional_residual,
    duhamel_residual,
    eval_selfsimilar,
    evolve_radial,
    heat_semigroup_homogeneous,
)

__version__ = "0.1.0"
