"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError and
ShapeError -> 2, DivergenceError -> 3.
"""


class WetlandsegError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WetlandsegError):
    """Invalid run configuration (unknown keys, missing required fields)."""


class ShapeError(WetlandsegError, ValueError):
    """Array dimensions do not satisfy an operation's contract."""


class DataError(WetlandsegError):
    """A data file or data structure is malformed or unsupported."""


class EmptySupportError(WetlandsegError, ValueError):
    """A reduction (loss or metric) was asked to average over zero valid pixels."""


class DivergenceError(WetlandsegError):
    """Training produced non-finite values."""


class CheckpointError(DataError):
    """Base class for checkpoint file problems."""


class NotACheckpointError(CheckpointError):
    """The file does not start with the checkpoint magic bytes."""


class CheckpointVersionError(CheckpointError):
    """The checkpoint format version is not supported."""


class TruncatedCheckpointError(CheckpointError):
    """The checkpoint file ended before all declared fields were read."""
