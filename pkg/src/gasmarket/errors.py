"""Exception taxonomy shared across the package.

Every error raised by library code derives from :class:`GasMarketError` and
carries an ``exit_code`` used by the command line layer: 2 for configuration
problems, 3 for bad input data or incompatible serialized documents, 4 for
runtime numeric failures and protocol misuse.
"""


class GasMarketError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class ConfigurationError(GasMarketError):
    """A parameter value violates its documented range, or a config key is unknown."""

    exit_code = 2


class DataError(GasMarketError):
    """Malformed or inconsistent input data (CSV content, misaligned series)."""

    exit_code = 3


class FormatError(DataError):
    """A serialized document has an unrecognized format tag or version."""


class FitError(DataError):
    """A regression design is rank deficient or lacks required observations."""


class DomainError(DataError):
    """A value lies outside the mathematical domain of an operation."""


class ProtocolError(GasMarketError):
    """An operation was invoked in a state that does not permit it."""


class ShapeError(GasMarketError):
    """Array dimensions do not compose."""


class NumericError(GasMarketError):
    """Non-finite values appeared where finite arithmetic was required."""
