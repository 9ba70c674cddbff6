"""Exception types raised by the solvers and the CLI."""


class AnnularError(Exception):
    """Base class for all package errors."""


class OutOfTube(AnnularError):
    """A point lies outside the tubular neighbourhood where projection is valid."""


class DegreeMismatch(AnnularError):
    """A lift does not increase by exactly 2*pi over one period."""


class TargetNotAttained(AnnularError):
    """A normalization target is outside the range of the lift."""


class InvalidModulus(AnnularError):
    """The conformal modulus rho is outside the admissible interval."""


class DegenerateModulus(AnnularError):
    """A rho-derivative was requested on the two-disc stratum rho = 0."""


class SliceOutOfRange(AnnularError):
    """A radial slice was requested outside the open annulus."""


class NoConvergence(AnnularError):
    """An iterative solver hit its iteration budget.

    Attributes
    ----------
    residual : float
        Last residual (or criticality) reached.
    iterations : int
        Iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0, state=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.state = state


class Collapsed(AnnularError):
    """The annulus minimization degenerated toward the two-disc stratum."""

    def __init__(self, message, state=None, diagnostics=None):
        super().__init__(message)
        self.state = state
        self.diagnostics = diagnostics or {}


class PathCollapse(AnnularError):
    """The mountain-pass path maximum drifted to an endpoint."""

    def __init__(self, message, barrier=None):
        super().__init__(message)
        self.barrier = barrier or {}


class ConfigError(AnnularError):
    """Invalid run configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
