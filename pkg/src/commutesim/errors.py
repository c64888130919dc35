"""Exception hierarchy shared across the simulator.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures with 3, and plain I/O errors (``OSError``)
with 4.
"""


class CommuteSimError(Exception):
    """Base class for all simulator-specific errors."""


class ConfigurationError(CommuteSimError, ValueError):
    """Invalid input: bad grid bounds, rates, time steps, config files."""


class NumericalError(CommuteSimError, RuntimeError):
    """A numerical procedure failed: solver breakdown, lost positivity."""


class SingularNormalizationError(NumericalError):
    """Kernel normalization constant too close to zero to divide by."""


class ResourceLimitError(NumericalError):
    """A computation would exceed a hard step or iteration budget."""
