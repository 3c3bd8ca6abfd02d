"""Exception types raised across the package."""


class ShockformError(Exception):
    """Base class for all package errors."""


class HyperbolicityLoss(ShockformError):
    """Eigenvalues collided, went complex, or came closer than the gap."""


class GenuineNonlinearityFailure(ShockformError):
    """The shocking field is (numerically) linearly degenerate somewhere."""


class UnknownSystem(ShockformError):
    """Requested builtin system name does not exist."""


class BoxExit(ShockformError):
    """A state left the declared state-space box."""


class NoShock(ShockformError):
    """The profile never produces a negative steepening rate."""


class CertificateFailure(ShockformError):
    """A nondegeneracy or causal certificate was violated.

    The ``clause`` attribute names the violated condition.
    """

    def __init__(self, message, clause=None):
        super().__init__(message)
        self.clause = clause


class ShockReached(ShockformError):
    """Normal termination: the inverse foliation density hit the threshold.

    The state at which the threshold was crossed is kept on ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NanDetected(ShockformError):
    """Non-finite values appeared during time stepping."""


class NonMonotoneMap(ShockformError):
    """x(u) failed to be strictly increasing."""


class NonUniquePreshock(ShockformError):
    """Two comparable minima of mu compete for the first singularity."""


class FitDegenerate(ShockformError):
    """The fit window reaches too close to the singular time."""


class DomainError(ShockformError):
    """Argument outside the domain of a closed-form evaluator."""


class InsufficientShells(ShockformError):
    """Fewer dyadic shells are populated than the validation needs."""


class IllConditionedFit(ShockformError):
    """Least-squares design matrix is too badly conditioned."""


class DomainExit(ShockformError):
    """A traced characteristic left the computed region.

    ``face`` is one of ``"bottom"``, ``"top"``, ``"left"``, ``"right"``.
    """

    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


class ResolutionLoss(ShockformError):
    """Level-set ladder stopped converging at the expected rate."""


class AmbiguousClass(ShockformError):
    """A boundary point sits within tolerance of two classes."""


class ConfigError(ShockformError):
    """Experiment configuration could not be parsed or resolved."""
