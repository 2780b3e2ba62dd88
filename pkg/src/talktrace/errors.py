"""Exception types shared across the toolkit."""


class TalktraceError(Exception):
    """Base class for all toolkit errors."""


class ScorerBackendError(TalktraceError):
    """Remote scorer transport failed after retries.

    Carries the last HTTP status when one was received (None for pure
    transport failures such as timeouts).
    """

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ScorerProtocolError(TalktraceError):
    """Remote scorer response did not match the completions wire contract."""


class ChatBackendError(TalktraceError):
    """The chat backend failed to produce a reply."""


class NoEvidenceError(TalktraceError):
    """No teacher sentence is available to attribute."""


class CorpusError(TalktraceError):
    """A benchmark corpus file or case is malformed."""
