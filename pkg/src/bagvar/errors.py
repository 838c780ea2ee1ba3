"""Exception hierarchy shared by the library and the CLI.

Each error class carries the process exit code the CLI maps it to.
"""


class BagvarError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class ConfigError(BagvarError):
    """Invalid configuration: bad plan dimensions, unknown generator, bad flags."""

    exit_code = 2


class DataError(BagvarError):
    """Malformed input data: missing values, non-numeric cells, shape mismatches."""

    exit_code = 3


class EstimationError(BagvarError):
    """An estimator or study could not produce a valid result."""

    exit_code = 4


class CapacityError(BagvarError):
    """A combinatorial guard was exceeded (exact enumeration too large)."""

    exit_code = 5


class FitError(EstimationError):
    """A base learner failed to fit (empty effective data, rank deficiency)."""


class ReplicateError(EstimationError):
    """A learner failed on one bootstrap replicate; carries the replicate index."""

    def __init__(self, replicate: int, message: str):
        super().__init__(f"replicate {replicate}: {message}")
        self.replicate = replicate
