"""Exception types shared across the engine."""


class InputError(ValueError):
    """User-supplied data or configuration is invalid."""


class InsufficientDataError(InputError):
    """Not enough observations to fit or extrapolate."""


class InsufficientVariationError(InputError):
    """Inputs are degenerate (e.g. all origins share one population)."""


class ReferentialIntegrityError(InputError):
    """Records reference ids that do not exist in the companion table."""

    def __init__(self, message: str, offenders: list[str] | None = None):
        super().__init__(message)
        self.offenders = offenders or []


class UndefinedMetricError(InputError):
    """Metric has no defined value for these inputs (e.g. zero variance)."""


class ModelNotFittedError(RuntimeError):
    """A trained model was required but no weights are available."""
