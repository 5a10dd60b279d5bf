"""Exception types shared across the package."""


class SSHeatError(Exception):
    """Base class for all errors raised by this package."""


class NonIntegrable(SSHeatError):
    """The homogeneous initial trace mu*|x|^(-2/alpha) is not locally integrable."""


class BelowThreshold(SSHeatError):
    """mu is not above the largeness thresholds required by a bound."""


class StepSizeUnderflow(SSHeatError):
    """The adaptive integrator drove the step size below the representable floor."""


class WindowTooShort(SSHeatError):
    """The trajectory tail is too short to certify a limit plateau."""


class ContractionFailed(SSHeatError):
    """The fixed-point construction failed to contract after all nu halvings."""


class RootFindDiverged(SSHeatError):
    """An endpoint root-find lost its bracket or exhausted its iteration budget."""


class DomainMismatch(SSHeatError):
    """A trajectory was passed to a map whose domain it does not fit."""


class RegimeMismatch(SSHeatError):
    """The operation is restricted to a parameter regime the input is not in."""


class BracketNotFound(SSHeatError):
    """Bracket expansion exhausted its budget without a sign change."""


class PeakBelowTarget(SSHeatError):
    """The interval peak of |L| never exceeds the requested target value."""


class UndeterminedClassification(SSHeatError):
    """Tail plateaus conflict and retries are exhausted; refusing to guess."""


class BlowupDetected(SSHeatError):
    """The numerical solution exceeded the blow-up guard threshold."""


class ExtrapolationWarning(UserWarning):
    """Values were requested beyond the computed grid and tail laws were used."""
