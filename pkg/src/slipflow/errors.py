"""Exception types shared across the package."""


class SlipflowError(Exception):
    """Base class for all package errors."""


class DimensionError(SlipflowError, ValueError):
    """Array or frame dimensions do not agree."""


class ParameterError(SlipflowError, ValueError):
    """A numeric parameter is outside its valid range."""


class ConfigError(SlipflowError, ValueError):
    """Invalid configuration (key/value files, ROI geometry, ...)."""


class FormatError(SlipflowError, ValueError):
    """Malformed file content.

    ``offset`` is the byte offset (binary formats) or the 1-based line
    number (text formats) where parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)
        self.offset = offset
