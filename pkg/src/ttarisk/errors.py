"""Exception hierarchy shared across the package."""


class RiskModelError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RiskModelError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OverlapError(RiskModelError):
    """Vehicles already overlap; the kinematic state is not a valid pre-collision state."""


class UnboundedSupportError(RiskModelError):
    """A distribution carries probability mass at -inf that was never mapped to a finite cap."""


class EmptyHistogramError(RiskModelError):
    """A histogram with zero total count cannot be normalized."""


class MappingError(RiskModelError):
    """A state merge map is not total or its groups are not contiguous."""


class ConfigError(RiskModelError):
    """Configuration values violate a structural invariant."""


class InfeasibleFlowError(RiskModelError):
    """Requested traffic flow exceeds the capacity of the fundamental diagram."""


class NoExitError(RiskModelError):
    """No absorbing state is reachable; the exit-distribution system is degenerate."""


class InfiniteExitTimeError(RiskModelError):
    """The accident state is unreachable, so the expected hitting time is infinite."""


class NonAbsorptionError(RiskModelError):
    """A Monte Carlo walk exceeded the step cap without being absorbed."""


class EmptyTraceError(RiskModelError):
    """A trajectory with fewer than two usable frames cannot yield transition counts."""
