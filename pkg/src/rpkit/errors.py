"""Exception types shared across rpkit."""


class RpkitError(Exception):
    """Base class for rpkit failures."""


class DimensionError(RpkitError, ValueError):
    """Operand shapes are incompatible."""


class ConvergenceError(RpkitError, ArithmeticError):
    """An iterative numerical routine did not converge."""


class BudgetExceededError(RpkitError, ValueError):
    """A combinatorial enumeration would exceed its configured budget."""


class MatrixFileError(RpkitError, OSError):
    """A matrix-bearing file is unreadable or corrupt.

    ``where`` names the byte offset (binary formats) or line (text formats)
    at which the problem was found.
    """

    def __init__(self, path, message, where=None):
        self.path = str(path)
        self.where = where
        loc = f" at {where}" if where else ""
        super().__init__(f"{self.path}{loc}: {message}")
