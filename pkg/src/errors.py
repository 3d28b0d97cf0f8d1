class PalmError(Exception):
    """Base error for the PALM toolkit"""


class DimensionError(PalmError, ValueError):
    """Input dimensions do not agree"""


class FactorizationError(PalmError):
    """Kernel matrix could not be Cholesky factorized"""

    def __init__(self, n: int, eta: float, detail: str = "") -> None:
        self.n = n
        self.eta = eta
        message = (
            f"Cholesky factorization of the {n}x{n} kernel matrix failed "
            f"(nugget={eta:.3g}); try raising the nugget"
        )
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class DegenerateDataError(PalmError, ValueError):
    """Data cannot support the requested fit"""


class ConfigurationError(PalmError, ValueError):
    """Invalid run or model configuration"""


class ModelFormatError(PalmError):
    """A persisted model file is malformed or has an unsupported version"""
