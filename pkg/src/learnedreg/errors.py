"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid configuration or parameter values."""


class FormatError(ValueError):
    """A dataset or export file does not match its declared layout."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DimensionError(ValueError):
    """Array shapes do not match the geometry they are used with."""


class CapacityError(MemoryError):
    """A dense materialization would exceed the configured memory budget."""


class TrainingError(RuntimeError):
    """Optimization diverged; the loss trace up to divergence is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
