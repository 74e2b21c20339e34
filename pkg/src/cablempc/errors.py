"""Exception hierarchy shared across the package."""


class CableError(Exception):
    """Base class for all package-specific errors."""


class SingularConfigurationError(CableError):
    """Two adjacent cable nodes coincide; the strain stencil is undefined."""


class InvalidTransitionError(CableError):
    """A hybrid reset was requested from the wrong discrete mode."""


class DivergenceError(CableError):
    """Integration produced non-finite values."""


class ConfigurationError(CableError):
    """Malformed scenario, reference, or solver configuration."""


class DegenerateTrainingError(CableError):
    """Snapshot data has no usable content (all-zero fluctuations)."""


class SolverFailure(CableError):
    """The trajectory optimizer could not produce a usable solution."""


class PlanningFailure(CableError):
    """The segmented planner could not find a feasible trajectory."""
