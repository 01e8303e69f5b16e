"""Exception hierarchy for discourse-risk."""

from pathlib import Path
from typing import Optional, Union


class DiscourseRiskError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DiscourseRiskError):
    """Invalid or incomplete configuration."""


class CorpusError(DiscourseRiskError):
    """Malformed corpus input."""


class EmptySentence(CorpusError):
    """A line produced no tokens."""


class AlignmentError(CorpusError):
    """Source and target sides disagree in document or sentence counts."""


class ResourceParseError(DiscourseRiskError):
    """A metric resource file (relation DB, topic table, stoplist) could not be parsed."""

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ) -> None:
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path if line is None else f"{self.path}:{line}"
        elif line is not None:
            location = f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class UnknownLabel(ResourceParseError):
    """A relation DB line uses a label outside the supported set."""


class DimensionMismatch(ResourceParseError):
    """A topic table row does not have the declared number of values."""


class MissingReference(DiscourseRiskError):
    """A reference-based reward was requested without reference sentences."""


class CheckpointError(DiscourseRiskError):
    """A checkpoint file is unreadable or inconsistent."""


class VocabMismatch(CheckpointError):
    """Checkpoint vocabulary does not match the one in use."""
