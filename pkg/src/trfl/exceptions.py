"""Exception hierarchy shared by every subpackage.

The CLI maps these onto exit codes: configuration / data problems exit 2,
numerical failures exit 3.
"""


class TRFLError(Exception):
    """Base class for all library errors."""


class ConfigurationError(TRFLError, ValueError):
    """Shapes, channels or hyper-parameters that cannot work together."""


class ArchitectureError(ConfigurationError):
    """An architecture graph is malformed or geometrically inconsistent.

    ``node`` names the offending node when one can be identified.
    """

    def __init__(self, message, node=None):
        if node is not None:
            message = f"node {node!r}: {message}"
        super().__init__(message)
        self.node = node


class ParseError(TRFLError, ValueError):
    """A binary input could not be decoded; ``offset`` is the byte position."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class GenerationError(ConfigurationError):
    """A dataset configuration cannot produce valid videos."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class LoadError(TRFLError, IOError):
    """A container or checkpoint on disk is corrupt or of the wrong version."""


class NumericalError(TRFLError, ArithmeticError):
    """Non-finite values appeared during training or evaluation."""
