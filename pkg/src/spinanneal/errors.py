"""Exception hierarchy shared across the package."""


class SpinAnnealError(Exception):
    """Base class for all package errors."""


class InputError(SpinAnnealError, ValueError):
    """Invalid argument, file content, or configuration."""


class StateError(SpinAnnealError, RuntimeError):
    """Operation called on an object in the wrong state."""


class CapacityError(SpinAnnealError, RuntimeError):
    """Problem size exceeds what an exact method can handle."""


class DegenerateInputError(InputError):
    """Input is structurally valid but numerically degenerate (e.g. zero spread)."""


class MetricUndefinedError(InputError):
    """A metric is undefined for the given inputs (e.g. zero reference energy)."""


class NumericError(SpinAnnealError, RuntimeError):
    """A computation produced non-finite values."""
