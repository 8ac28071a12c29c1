"""Shared exception types."""


class ZeroModeError(ValueError):
    """Raised when the constant (zero) wave vector is used."""


class BasisMismatchError(ValueError):
    """Raised when fields built on different bases are combined."""


class InfiniteMassError(ValueError):
    """Raised when a Levy-measure integral diverges on the requested region."""


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to converge within budget."""


class InadmissibleKernelError(ValueError):
    """Raised when a jump-kernel family cannot be normalized."""


class ConfigError(ValueError):
    """Raised on malformed run configuration (unknown key, bad value)."""


class CertificationError(RuntimeError):
    """Raised when a kernel fails the startup hypothesis checks."""


class BlowUpError(RuntimeError):
    """Raised when a trajectory produces non-finite coefficients.

    Attributes:
        time: first grid time at which a non-finite value appeared.
    """

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"non-finite state at t={time:.6g}")
