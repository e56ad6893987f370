"""Exception hierarchy shared by every module of the package."""


class ScadCIError(Exception):
    """Base class for all errors raised by scadci."""


class DomainError(ScadCIError, ValueError):
    """An argument lies outside the domain of the function."""


class ValidationError(ScadCIError, ValueError):
    """A configuration or serialized object failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SolverError(ScadCIError, RuntimeError):
    """A root solve did not converge."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class QuadratureError(ScadCIError, RuntimeError):
    """Adaptive integration ran out of budget before meeting its tolerance."""

    def __init__(self, message, value=None, err_est=None):
        super().__init__(message)
        self.value = value
        self.err_est = err_est


class InfeasibleError(ScadCIError, RuntimeError):
    """No candidate satisfied the coverage and positivity constraints."""

    def __init__(self, message, best=None, violations=None):
        super().__init__(message)
        self.best = best
        self.violations = violations
