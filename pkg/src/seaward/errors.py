"""Exception hierarchy shared by all seaward modules."""


class SeawardError(Exception):
    """Base class for every error raised by this package."""


class InputError(SeawardError):
    """A required input file or directory is missing or unreadable."""


class FormatError(SeawardError):
    """A file exists but its contents do not parse as the expected format."""


class OutputError(SeawardError):
    """An output path cannot be written."""


class EmptyImageError(SeawardError):
    """An operation that needs pixels received a zero-pixel image."""


class DimensionError(SeawardError):
    """Array shapes are inconsistent with what the operation requires."""


class PlacementError(SeawardError):
    """Scene synthesis could not place a target after the retry budget."""


class DegenerateInputError(SeawardError):
    """Clustering input has fewer than two distinct vectors."""


class ConfigError(SeawardError):
    """A configuration file or value failed validation."""
