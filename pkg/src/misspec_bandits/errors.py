"""Exception and warning types shared across the package."""


class MisspecError(Exception):
    """Base class for all package errors."""


class SingularDesign(MisspecError):
    """The weighted design matrix has a pivot at or below the singularity tolerance."""


class TiedOptimum(MisspecError):
    """The maximum reward is attained by more than one arm."""


class DegenerateRegion(MisspecError):
    """Two arms share a feature vector, so a parameter region is empty."""


class EmptyRegion(MisspecError):
    """A half-space system has no strictly interior point."""


class NotMember(MisspecError):
    """An operation that requires a robust instance received a non-member."""


class RegionTooThin(MisspecError):
    """Rejection sampling exhausted its budget without an accepted draw."""

    def __init__(self, message, draws=0, accepted=0):
        super().__init__(message)
        self.draws = draws
        self.accepted = accepted

    @property
    def acceptance_rate_upper(self):
        # rule-of-three 95% upper bound when nothing was accepted
        if self.draws == 0:
            return 1.0
        return max(self.accepted, 3) / self.draws


class ArmOutOfRange(MisspecError, IndexError):
    pass


class ConfigError(MisspecError, ValueError):
    pass


class InsufficientData(MisspecError, ValueError):
    pass


class BoundaryWarning(UserWarning):
    """An instance sits within roundoff distance of a region boundary."""


class RidgeFallbackWarning(UserWarning):
    """Forced exploration left the design too weak; the agent switched to ridge mode."""
