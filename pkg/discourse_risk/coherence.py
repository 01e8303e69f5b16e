"""
Coherence (COH): mean cosine similarity between the topic vectors of adjacent
sentences. A sentence's topic vector is the mean of its in-table word vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import Sentence
from .errors import DimensionMismatch, ResourceParseError
from .lexcohesion import StopList

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TopicTable:
    dim: int
    vectors: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, word: object) -> bool:
        return word in self.vectors

    @classmethod
    def from_dict(cls, vectors: Mapping[str, Sequence[float]]) -> TopicTable:
        """Build a read-only table; all vectors must share one length."""
        frozen: Dict[str, np.ndarray] = {}
        dim = None
        for word, values in vectors.items():
            array = np.array(values, dtype=np.float64)
            if dim is None:
                dim = array.shape[0]
            if array.shape != (dim,):
                raise DimensionMismatch(f"{word!r} has {array.size} values, expected {dim}")
            array.setflags(write=False)
            frozen[word] = array
        if dim is None or dim < 1:
            raise ResourceParseError("topic table needs at least one vector of dim >= 1")
        return cls(dim, MappingProxyType(frozen))


@dataclass(frozen=True)
class SentenceTopic:
    vector: np.ndarray
    covered: int


@dataclass(frozen=True)
class CohScore:
    value: float
    pairs: int

    @property
    def percent(self) -> float:
        return 100.0 * self.value


def load_topic_table(path: PathLike) -> TopicTable:
    """
    Load word vectors in word2vec text format: a ``count dim`` header, then
    ``word v1 ... v_dim`` rows.

    Raises:
        ResourceParseError: Bad header, unparsable value, duplicate word, or a
            row count different from the header.
        DimensionMismatch: A row with the wrong number of values.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise FileNotFoundError(f"topic table not found: {path}") from e
    if not lines:
        raise ResourceParseError("missing 'count dim' header", path, 1)

    header = lines[0].split()
    try:
        count, dim = (int(x) for x in header)
    except ValueError as e:
        raise ResourceParseError(f"bad header {lines[0]!r}", path, 1) from e
    if dim < 1 or count < 0:
        raise ResourceParseError(f"bad header {lines[0]!r}", path, 1)

    vectors: Dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        word, *values = line.split()
        word = word.lower()
        if len(values) != dim:
            raise DimensionMismatch(
                f"{word!r} has {len(values)} values, expected {dim}", path, lineno
            )
        if word in vectors:
            raise ResourceParseError(f"duplicate word {word!r}", path, lineno)
        try:
            array = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as e:
            raise ResourceParseError(f"non-numeric value in row for {word!r}", path, lineno) from e
        array.setflags(write=False)
        vectors[word] = array

    if len(vectors) != count:
        raise ResourceParseError(f"header declares {count} rows, found {len(vectors)}", path)
    logger.debug("loaded %d topic vectors of dim %d from %s", count, dim, path)
    return TopicTable(dim, MappingProxyType(vectors))


def sentence_topic(
    sentence: Sentence, table: TopicTable, stop: Optional[StopList] = None
) -> SentenceTopic:
    """Mean vector of the sentence's in-table tokens; zeros when none are covered."""
    rows: List[np.ndarray] = [
        table.vectors[tok]
        for tok in sentence.tokens
        if tok in table.vectors and (stop is None or tok not in stop)
    ]
    if not rows:
        return SentenceTopic(np.zeros(table.dim), 0)
    return SentenceTopic(np.mean(rows, axis=0), len(rows))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / norm, -1.0, 1.0))


def coherence(
    sentences: Sequence[Sentence], table: TopicTable, stop: Optional[StopList] = None
) -> CohScore:
    """
    Average cosine between adjacent sentence topic vectors.

    Blocks of fewer than two sentences score 0 with ``pairs == 0``; callers
    that use COH as a reward leave such blocks out.
    """
    topics = [sentence_topic(s, table, stop).vector for s in sentences]
    pairs = max(len(topics) - 1, 0)
    if pairs == 0:
        return CohScore(0.0, 0)
    total = sum(cosine(topics[i], topics[i - 1]) for i in range(1, len(topics)))
    return CohScore(total / pairs, pairs)
