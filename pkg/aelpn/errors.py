"""aelpn error types"""

from typing import Optional


class AelpnError(Exception):
    """Base exception for all aelpn errors"""


class ConfigError(AelpnError, ValueError):
    """Raised when a configuration value is invalid"""


class IncompatibleVariantError(ConfigError):
    """Raised when a potential variant is paired with the wrong ICNN preset"""


class ShapeError(AelpnError, ValueError):
    """Raised when array shapes or signal dimensions do not match"""


class NumericalError(AelpnError):
    """Raised when a numerical procedure fails"""


class NonFiniteLossError(NumericalError):
    """Raised when training produces a NaN or infinite loss"""

    def __init__(self, step: int, value: float):
        super().__init__(f"Non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value


class InversionError(NumericalError):
    """Raised when prox inversion does not reach the residual tolerance"""

    def __init__(self, best_residual: float, iterations: int):
        super().__init__(
            f"Prox inversion did not converge after {iterations} iterations "
            f"(best residual {best_residual:.3e}); the potential is likely not "
            f"strongly convex enough"
        )
        self.best_residual = best_residual
        self.iterations = iterations


class DataFormatError(AelpnError):
    """Raised when an input file is malformed"""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class PnmHeaderError(DataFormatError):
    """Raised when a PGM/PPM header cannot be parsed"""


class PnmTruncatedError(DataFormatError):
    """Raised when a PGM/PPM payload is shorter than its header promises"""

    def __init__(self, expected: int, actual: int, offset: int, unit: str = "bytes"):
        super().__init__(
            f"Truncated payload: expected {expected} {unit}, got {actual}", offset
        )
        self.expected = expected
        self.actual = actual


class PnmMaxvalError(DataFormatError):
    """Raised when a PGM/PPM file uses a maxval other than 255"""


class TensorFormatError(DataFormatError):
    """Raised when a raw tensor record is malformed"""


class CheckpointError(AelpnError):
    """Raised when a checkpoint cannot be read or written"""


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint has an unsupported format version"""
