"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UndefinedEquilibriumError(DomainError):
    """The network has no link-turnover equilibrium (alpha = omega = 0)."""


class ParameterizationError(DomainError):
    """A distribution cannot be parameterized from the requested moments."""


class GenerationError(RuntimeError):
    """Random graph construction failed to produce a valid realization."""


class IntegrationError(RuntimeError):
    """The ODE integrator failed; ``time`` holds the last reached time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NumericalError(RuntimeError):
    """A numerical routine (eigensolve, linear solve) failed to converge."""


class ConfigError(ValueError):
    """A run configuration file is malformed or semantically invalid."""
