"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigurationError and FormatError
exit 2, NonConvergenceError exits 3, NumericalDivergenceError exits 4.
"""


class BuqoError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BuqoError):
    """Invalid configuration, parameters or preconditions."""


class FormatError(BuqoError):
    """Malformed file content (bad magic, truncation, CRC mismatch...)."""


class NonConvergenceError(BuqoError):
    """An iterative solver hit its iteration budget without meeting its goal."""


class NumericalDivergenceError(BuqoError):
    """Non-finite values appeared during iteration."""


class DegenerateStructureError(BuqoError):
    """The tested structure is empty or already absent from the reference image."""


class StateError(BuqoError):
    """An operation was called out of order (e.g. VJP without a forward cache)."""
