"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors 1, data errors 2,
numerical failures 3.
"""


class AwekwsError(Exception):
    """Base class for all package errors."""


class FormatError(AwekwsError):
    """A file does not match its declared binary or text format."""


class DataError(AwekwsError):
    """Inputs are well-formed but violate a contract (missing ids, empty sets, ...)."""


class NumericalError(AwekwsError):
    """A numeric computation failed (divergence, non-finite values at compute time)."""
