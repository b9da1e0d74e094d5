# backend/errors.py

class ConfigurationError(ValueError):
    """Inconsistent stack, schedule or scenario configuration."""


class ValidationError(ValueError):
    """Invalid input values; carries one message per offending field."""

    def __init__(self, message, fields=None):
        self.fields = list(fields or [])
        if self.fields:
            message = f"{message}: " + "; ".join(self.fields)
        super().__init__(message)


class RangeError(ValueError):
    """Interpolation query outside the sampled hull."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a formula."""


class FitError(RuntimeError):
    """Least-squares fit that did not converge."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class NumericalError(RuntimeError):
    """Singular matrices, rank-deficient designs and invariant breaches."""
