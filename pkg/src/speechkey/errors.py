"""Exception hierarchy shared by every speechkey module."""


class SpeechKeyError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class InvalidBlockSize(SpeechKeyError, ValueError):
    category = "block-size"


class ShapeError(SpeechKeyError, ValueError):
    category = "shape"


class PatchSizeMismatch(SpeechKeyError, ValueError):
    category = "patch-size"


class InvalidSignal(SpeechKeyError, ValueError):
    category = "signal"


class UnsupportedSignal(SpeechKeyError, ValueError):
    category = "signal"


class TooShort(SpeechKeyError, ValueError):
    category = "signal"


class KeyMismatch(SpeechKeyError, ValueError):
    category = "key-mismatch"


class KeyFormatError(SpeechKeyError, ValueError):
    """Raised for unreadable or inconsistent key files.

    ``field`` names the offending JSON field when one can be identified.
    """

    category = "key-format"

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class WavFormatError(SpeechKeyError, ValueError):
    category = "wav-format"


class MatrixFormatError(SpeechKeyError, ValueError):
    category = "matrix-format"


class StreamError(SpeechKeyError):
    """An I/O failure during streaming encryption, tagged with the sample offset."""

    category = "stream"

    def __init__(self, message, position):
        super().__init__(f"{message} (at sample {position})")
        self.position = position
