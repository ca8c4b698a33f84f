"""Exception hierarchy shared by every qmoe module."""


class QMoEError(Exception):
    """Base class for all qmoe errors."""


class ConfigError(QMoEError, ValueError):
    """Invalid configuration (qubit caps, unknown names, bad hyperparameters)."""


class StructuralError(QMoEError, ValueError):
    """Mismatched dimensions, out-of-range qubit or parameter indices."""


class NumericError(QMoEError, ArithmeticError):
    """A non-finite value appeared in a forward pass, loss or gradient."""


class DataError(QMoEError, ValueError):
    """Data validation failure (feature ranges, missing classes)."""


class ParseError(DataError):
    """Malformed binary input. ``offset`` is the byte position at fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
