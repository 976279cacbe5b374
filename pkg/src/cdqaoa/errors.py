"""Exception types raised across the package."""


class CdqaoaError(Exception):
    """Base class for all package errors."""


class InvalidSizeError(CdqaoaError, ValueError):
    pass


class DegenerateSpectrumError(CdqaoaError, ValueError):
    """Raised when a Hamiltonian has a single distinct level, so no gap exists."""


class OperatorError(CdqaoaError, ValueError):
    """Dimension mismatch or a symmetry tag that does not hold."""


class NumericalError(CdqaoaError, RuntimeError):
    pass


class ParameterError(CdqaoaError, ValueError):
    """Angle vectors inconsistent with the requested variant or depth."""


class OptimizationError(CdqaoaError, RuntimeError):
    """Every restart of a multistart minimization failed."""


class MissingDataError(CdqaoaError, LookupError):
    pass
