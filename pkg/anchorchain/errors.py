"""
Exception hierarchy for anchorchain.
The CLI maps these onto exit codes (see anchorchain.cli).
"""

from typing import Optional


class AnchorChainError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(AnchorChainError):
    """Bad settings, unknown config keys or invalid command-line usage."""


class DataError(AnchorChainError):
    """Corpus, dataset or trace content that cannot be used."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        if line is not None:
            message = f"{path or '<input>'}:{line}: {message}"
        super().__init__(message)


class UnknownChunkError(DataError, KeyError):
    """A chunk id that is not in the corpus store."""

    def __init__(self, chunk_id: str):
        self.chunk_id = chunk_id
        super().__init__(f"unknown chunk id: {chunk_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class TemplateError(AnchorChainError):
    """A prompt template asset is missing or refers to an unknown placeholder."""


class ParseError(AnchorChainError):
    """Structured agent output could not be parsed."""


class BackendError(AnchorChainError):
    """A completion backend failed (network, HTTP status, exhausted retries)."""


class ScriptExhaustedError(BackendError):
    """The scripted backend has no programmed response left for a role."""


class ReplayMismatchError(BackendError):
    """A replayed request does not match the recorded transcript."""


class RerankError(BackendError):
    """The reranker backend failed; the untouched candidates travel with the error."""

    def __init__(self, message: str, candidates=None):
        self.candidates = candidates
        super().__init__(message)
