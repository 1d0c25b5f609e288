"""Exception hierarchy shared across segtune modules."""


class SegtuneError(Exception):
    """Base class for all segtune errors."""


class ConfigError(SegtuneError, ValueError):
    """Invalid configuration: weights, spaces, budgets, datasets."""


class GridError(SegtuneError, ValueError):
    """A value or coordinate does not map onto the parameter grid."""


class FormatError(SegtuneError, ValueError):
    """Malformed mask file."""


class ShapeError(SegtuneError, ValueError):
    """Two masks that must be aligned have different dimensions."""


class MeasurementError(SegtuneError, ValueError):
    """Invalid timing measurement."""


class ProtocolError(SegtuneError, RuntimeError):
    """ask/tell called out of order or with a mismatched batch."""


class Finished(SegtuneError):
    """Raised by ``ask`` once an optimizer has nothing more to propose."""


class SurrogateError(SegtuneError, RuntimeError):
    """The Gaussian-process surrogate could not be factorized."""


class EvaluationError(SegtuneError, RuntimeError):
    """A workflow execution failed.

    ``stderr`` carries an excerpt of the child process error output when
    the failure came from an external command.
    """

    def __init__(self, message: str, stderr: str = "") -> None:
        super().__init__(message)
        self.stderr = stderr

    def __str__(self) -> str:
        base = super().__str__()
        if self.stderr:
            return f"{base}: {self.stderr.strip()}"
        return base
