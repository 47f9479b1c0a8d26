"""Exception hierarchy shared across the package."""


class VkfError(Exception):
    """Base class for all package errors."""


class UnsupportedFormat(VkfError):
    pass


class Truncated(VkfError):
    pass


class ImageTooSmall(VkfError):
    pass


class InconsistentTracks(VkfError):
    """A track crosses a shot boundary. Signals a caller bug."""


class CorruptIndex(VkfError):
    pass


class EmptyQuery(VkfError):
    pass


class TooFewFeatures(VkfError):
    pass


class EmptyIndex(VkfError):
    pass


class DuplicateRecord(VkfError):
    pass


class InvalidRange(VkfError):
    pass


class InvalidRecord(VkfError):
    pass


class DegenerateDenominator(VkfError):
    pass


class NoQueries(VkfError):
    pass
