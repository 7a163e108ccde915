"""Exception hierarchy shared across the package."""


class MagnetoQEDError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InvalidInputError(MagnetoQEDError, ValueError):
    exit_code = 2


class ConfigError(InvalidInputError):
    pass


class NonDissipativeModelError(InvalidInputError):
    pass


class InconsistentSplitError(MagnetoQEDError):
    pass


class NotPassiveError(MagnetoQEDError):
    pass


class InfeasiblePartitionError(MagnetoQEDError):
    pass


class TruncationError(MagnetoQEDError):
    pass


class GridError(MagnetoQEDError):
    pass


class CoverageError(MagnetoQEDError):
    pass


class WindowError(MagnetoQEDError):
    pass


class PoleCollisionError(MagnetoQEDError):
    pass


class DegenerateModeError(MagnetoQEDError):
    pass


class PreconditionError(MagnetoQEDError):
    pass


class NumericalError(MagnetoQEDError):
    pass


class InconsistentSpectraError(MagnetoQEDError):
    pass
