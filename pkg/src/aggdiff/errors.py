"""Exception hierarchy shared by all modules."""


class AggDiffError(Exception):
    """Base class for every error raised by the package."""


class DomainError(AggDiffError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConstructionError(AggDiffError, ValueError):
    """A density or decomposition could not be built from the inputs."""


class StabilityError(AggDiffError, ArithmeticError):
    """A time step produced negative values (time step too large)."""


class DomainEscapeError(AggDiffError, RuntimeError):
    """Mass reached the boundary cells of the computational grid."""


class ConvergenceError(AggDiffError, RuntimeError):
    """An iteration did not converge; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class CurveDomainError(AggDiffError, ValueError):
    """A curve was evaluated past its validity window."""


class ConsistencyError(AggDiffError, RuntimeError):
    """An internal check that should hold by construction failed."""


class CertificateError(AggDiffError, RuntimeError):
    """A certificate (sub-criticality, central mass floor, ...) failed."""


class ConfigError(DomainError):
    """An experiment configuration failed validation."""
