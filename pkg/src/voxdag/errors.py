"""Exception types shared across the package."""


class VoxdagError(Exception):
    """Base class for all errors raised by voxdag."""


class BoundsError(VoxdagError, ValueError):
    """A coordinate or scene parameter lies outside the world."""


class ConfigError(VoxdagError, ValueError):
    """Invalid configuration values (world, render or streaming)."""


class CapacityError(VoxdagError):
    """The resident pool cannot hold the requested chunks."""


class FieldOverflowError(VoxdagError, ValueError):
    """A visibility-buffer field does not fit its bit width."""


class ConsistencyError(VoxdagError):
    """Internal invariant violated (should be impossible)."""


class BundleError(VoxdagError):
    """Base class for scene bundle and dense file format errors."""

    code = 0


class BadMagicError(BundleError):
    code = 1


class BadVersionError(BundleError):
    code = 2


class TruncatedError(BundleError):
    code = 3


class OffsetError(BundleError):
    code = 4
