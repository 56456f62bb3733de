"""Exception types shared across the package."""


class MindsError(Exception):
    """Base class for package errors."""


class IngestionError(MindsError, ValueError):
    """Malformed input file; message names the offending row/column."""


class DimensionError(MindsError, ValueError):
    """Shapes of data and parameters disagree."""


class NumericalError(MindsError, RuntimeError):
    """A sampler update produced non-finite values.

    Carries the iteration index and the offending step when raised from a chain.
    """

    def __init__(self, message, iteration=None, step=None):
        if iteration is not None or step is not None:
            message = f"{message} (iteration={iteration}, step={step})"
        super().__init__(message)
        self.iteration = iteration
        self.step = step
