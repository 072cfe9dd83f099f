class SfkalmanError(Exception):
    pass


class ConfigurationError(SfkalmanError, ValueError):
    pass


class ValidationError(SfkalmanError, ValueError):
    pass


class UnknownTaskError(ValidationError):
    pass


class NumericalDegeneracyError(SfkalmanError, ArithmeticError):
    pass


class SolverError(NumericalDegeneracyError):
    """Raised when (I - gamma F) is too ill-conditioned to solve against."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


class DomainError(SfkalmanError, ValueError):
    pass


class CheckpointError(SfkalmanError):
    pass
