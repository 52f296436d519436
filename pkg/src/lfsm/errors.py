"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its admissible range."""


class NumericalError(RuntimeError):
    """A quadrature or linear-algebra step failed to converge; the message
    carries diagnostics."""


class DiagnosticError(RuntimeError):
    """A statistical estimator received data it cannot work with (for
    example a degenerate empirical characteristic function)."""
