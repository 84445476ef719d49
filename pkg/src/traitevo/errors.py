"""Exception hierarchy shared across the package."""


class TraitEvoError(Exception):
    """Base class for all package errors."""


class ContractViolation(TraitEvoError, ValueError):
    """An operation was called with inputs that break its preconditions."""


class DegenerateStateError(TraitEvoError):
    """A density has nonpositive or non-finite total mass."""


class ConfigurationError(TraitEvoError):
    """A scenario, scheme or solver was configured inconsistently."""


class AuditFailure(ConfigurationError):
    """A scenario failed its hypothesis audit and no override was given."""

    def __init__(self, message, checks=()):
        super().__init__(message)
        self.checks = list(checks)


class NumericalError(TraitEvoError):
    """Base class for failures of a numerical procedure."""


class StabilityError(NumericalError):
    """The explicit scheme produced a negative density node."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericalBlowUpError(NumericalError):
    """Non-finite values appeared in the state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ExtinctionEvent(TraitEvoError):
    """A population size dropped to zero or below."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NoEquilibriumError(NumericalError):
    """G(x, .) has no sign change in the search bracket."""


class AmbiguityError(NumericalError):
    """More than one positive equilibrium was found where one is required."""


class AssumptionViolation(TraitEvoError):
    """A structural modelling assumption does not hold for the scenario."""


class BandExitError(AssumptionViolation):
    """The mean trait left the band around the fixed point."""


class PreconditionError(ContractViolation):
    """A solver precondition (e.g. a contraction condition) fails."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge within its budget."""
