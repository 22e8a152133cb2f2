"""Exception hierarchy."""


class TemporalSearchError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(TemporalSearchError, ValueError):
    """Invalid configuration, template or manifest."""


class BackendError(TemporalSearchError):
    """An inference call failed.

    ``retriable`` is true for transport-level failures (timeouts, 5xx,
    unreadable frames) and false for errors the server will repeat.
    """

    def __init__(self, message: str, retriable: bool = True, status: int | None = None):
        super().__init__(message)
        self.retriable = retriable
        self.status = status


class ProtocolError(BackendError):
    """The server answered, but not in the shape the client expects."""

    def __init__(self, message: str):
        super().__init__(message, retriable=False)


class FrameError(BackendError):
    """A frame could not be read or decoded."""

    def __init__(self, index: int, message: str):
        super().__init__(f"frame {index}: {message}", retriable=True)
        self.index = index
