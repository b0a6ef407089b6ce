"""Exception types shared across the package."""


class ContractError(ValueError):
    """Raised when an input violates a documented precondition (shape, sign, range)."""


class SingularityError(RuntimeError):
    """Raised when J M^-1 J^T is too ill-conditioned to invert."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class IntegrationError(RuntimeError):
    """Raised when the simulator produces non-finite accelerations."""


class NumericalError(RuntimeError):
    """Raised when a factorization fails even after regularization."""


class DegenerateComponentError(RuntimeError):
    """Raised when an EM mixture component collapses."""

    def __init__(self, message, component):
        super().__init__(message)
        self.component = component


class ConfigError(ValueError):
    """Raised for an invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class GenerationError(RuntimeError):
    """Raised when a scripted demonstration rollout does not behave as scripted."""
