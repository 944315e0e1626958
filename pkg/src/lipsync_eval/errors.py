"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented process exit status without a lookup table.
"""


class LipSyncError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class ConfigError(LipSyncError, ValueError):
    exit_code = 2


class SchemaError(LipSyncError, ValueError):
    exit_code = 2


class MissingAssetError(SchemaError, FileNotFoundError):
    def __init__(self, clip_id, path=None):
        self.clip_id = clip_id
        self.path = path
        msg = f"{clip_id}: missing asset" + (f" {path}" if path else "")
        super().__init__(msg)


class LandmarkError(LipSyncError, IndexError):
    exit_code = 2


class IoError(LipSyncError, OSError):
    exit_code = 2


class DataError(LipSyncError, ValueError):
    pass


class FormatError(DataError):
    pass


class TruncationError(FormatError):
    pass


class LengthError(DataError):
    pass


class DegenerateError(DataError):
    pass


class DegenerateGroupWarning(UserWarning):
    """A normalization group had a single member or zero variance."""
