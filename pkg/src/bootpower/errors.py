"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so the split matters: config problems,
bad input data, and estimation dead-ends are distinct failure classes.
"""


class BootpowerError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BootpowerError):
    """A precondition on an operation's inputs was violated."""


class DegenerateDataError(DomainError):
    """Inputs are formally valid but the statistic is undefined on them
    (e.g. a t statistic with zero variance in both groups)."""


class DataError(BootpowerError):
    """An input file is missing, unreadable, or schema-invalid."""


class ConfigError(BootpowerError):
    """A config file or command-line flag could not be interpreted."""


class EstimationError(BootpowerError):
    """A power estimate could not be produced (e.g. every replicate failed
    under the exclude policy)."""
