"""Exception types shared across the package."""


class PoseliftError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PoseliftError, ValueError):
    """An array argument has the wrong shape or rank."""


class ConfigError(PoseliftError, ValueError):
    """A configuration value is invalid or inconsistent."""


class NumericError(PoseliftError, ArithmeticError):
    """A computation produced or received non-finite values."""


class DataError(PoseliftError, ValueError):
    """A dataset file could not be parsed or validated."""


class AlignmentError(PoseliftError, ValueError):
    """Rigid alignment is undefined for the given point sets."""


class TrainingError(PoseliftError, RuntimeError):
    """Training aborted; the last good checkpoint is retained."""
