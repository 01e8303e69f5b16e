"""
Lexical cohesion (LC): the share of content tokens in a block that repeat, or are
lexically related to, an earlier content token of the same block.

Relations come from a TSV database (``word<TAB>label<TAB>word``) that stands in
for WordNet; the reverse of every edge is added at load time.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import (
    AbstractSet,
    DefaultDict,
    FrozenSet,
    Iterable,
    Iterator,
    Mapping,
    Sequence,
    Set,
    Tuple,
    Union,
)

from .corpus import RESERVED, Sentence
from .errors import ConfigError, ResourceParseError, UnknownLabel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class RelationLabel(str, Enum):
    SYNONYM = "synonym"
    NEAR_SYNONYM = "near_synonym"
    HYPERNYM = "hypernym"
    MERONYM = "meronym"
    TROPONYM = "troponym"
    ANTONYM = "antonym"
    COORDINATE = "coordinate"

    @classmethod
    def parse(cls, text: str) -> RelationLabel:
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown relation label {text!r}") from None


ALL_LABELS: FrozenSet[RelationLabel] = frozenset(RelationLabel)

Relation = Tuple[str, RelationLabel]


@dataclass(frozen=True)
class RelationDb:
    """word -> {(related word, label)}; symmetric, without self-relations."""

    entries: Mapping[str, FrozenSet[Relation]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def related(self, word: str) -> FrozenSet[Relation]:
        return self.entries.get(word, frozenset())

    def are_related(
        self, a: str, b: str, labels: AbstractSet[RelationLabel] = ALL_LABELS
    ) -> bool:
        return any(other == b and label in labels for other, label in self.related(a))

    @classmethod
    def from_triples(cls, triples: Iterable[Tuple[str, RelationLabel, str]]) -> RelationDb:
        table: DefaultDict[str, Set[Relation]] = defaultdict(set)
        for left, label, right in triples:
            left, right = left.lower(), right.lower()
            if left == right:
                logger.warning("dropping self-relation %s %s %s", left, label.value, right)
                continue
            table[left].add((right, label))
            table[right].add((left, label))
        return cls({word: frozenset(rels) for word, rels in table.items()})


@dataclass(frozen=True)
class StopList:
    words: FrozenSet[str] = frozenset()

    def __contains__(self, word: object) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def empty(cls) -> StopList:
        return cls()

    @classmethod
    def of(cls, words: Iterable[str]) -> StopList:
        return cls(frozenset(w.strip().lower() for w in words if w.strip()))


@dataclass(frozen=True)
class LcScore:
    devices: int
    content_tokens: int
    value: float
    words: int = 0

    @property
    def percent(self) -> float:
        return 100.0 * self.value


def _meaningful_lines(path: Path) -> Iterator[Tuple[int, str]]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FileNotFoundError(f"resource file not found: {path}") from e
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, raw.rstrip("\r\n")


def load_relation_db(path: PathLike) -> RelationDb:
    """
    Load a relation database from ``word<TAB>label<TAB>word`` lines.

    Raises:
        ResourceParseError: A line does not have exactly three tab-separated fields.
        UnknownLabel: A label outside :class:`RelationLabel`.
    """
    path = Path(path)
    triples = []
    for lineno, line in _meaningful_lines(path):
        fields = line.split("\t")
        if len(fields) != 3 or not all(f.strip() for f in fields):
            raise ResourceParseError("expected word<TAB>label<TAB>word", path, lineno)
        left, label_text, right = (f.strip() for f in fields)
        try:
            label = RelationLabel.parse(label_text)
        except ValueError as e:
            raise UnknownLabel(str(e), path, lineno) from e
        triples.append((left, label, right))
    db = RelationDb.from_triples(triples)
    logger.debug("loaded %d relations for %d words from %s", len(triples), len(db), path)
    return db


def load_stoplist(path: PathLike) -> StopList:
    """One word per line; ``#`` comments ignored."""
    return StopList.of(line for _, line in _meaningful_lines(Path(path)))


def is_punctuation(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


def is_content_token(token: str, stop: StopList) -> bool:
    return token not in RESERVED and token not in stop and not is_punctuation(token)


def parse_labels(text: str) -> FrozenSet[RelationLabel]:
    """Comma- or plus-separated label names; empty means every label."""
    names = [n for n in text.replace("+", ",").split(",") if n.strip()]
    if not names:
        return ALL_LABELS
    try:
        return frozenset(RelationLabel.parse(n) for n in names)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def lexical_cohesion(
    sentences: Sequence[Sentence],
    db: RelationDb,
    stop: StopList = StopList(),
    labels: AbstractSet[RelationLabel] = ALL_LABELS,
    denominator: str = "content",
) -> LcScore:
    """
    Count cohesion devices over a block of sentences.

    A content token is a device when an earlier content token anywhere in the
    block has the same surface or is related to it through an enabled label.

    Args:
        sentences: The block, in document order.
        db: Relation database.
        stop: Words that are never content tokens.
        labels: Relation labels that count; repetition always counts.
        denominator: ``"content"`` divides by content tokens, ``"all"`` by every
            non-reserved token.

    Returns:
        LcScore with ``value = devices / max(denominator count, 1)``.
    """
    if denominator not in ("content", "all"):
        raise ConfigError(f"lc denominator must be 'content' or 'all', got {denominator!r}")

    seen: Set[str] = set()
    devices = content = words = 0
    for sentence in sentences:
        for token in sentence.tokens:
            if token in RESERVED:
                continue
            words += 1
            if not is_content_token(token, stop):
                continue
            content += 1
            if token in seen or any(
                other in seen for other, label in db.related(token) if label in labels
            ):
                devices += 1
            seen.add(token)

    total = content if denominator == "content" else words
    return LcScore(devices, content, devices / max(total, 1), words)
