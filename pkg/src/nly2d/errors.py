"""Exception hierarchy shared by every module of the package."""


class Nly2dError(Exception):
    """Base class for all package errors."""


class DomainError(Nly2dError, ValueError):
    """A request falls outside the domain on which an object is defined."""


class ConfigurationError(Nly2dError, ValueError):
    """Parameters are inconsistent or violate an operation's preconditions."""


class NumericalError(Nly2dError, RuntimeError):
    """A numerical procedure failed (factorization, divergence, non-contraction)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
