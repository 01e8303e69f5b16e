"""
Parallel document corpora: tokenization, vocabularies and document segments.

Corpus files are paired plain text, one sentence per line, with documents
separated by a literal ``<<<DOC>>>`` line on both sides.

Usage:
    from discourse_risk import corpus

    docs = corpus.load_corpus("train.src", "train.tgt")
    src_vocab = corpus.build_vocab(docs, max_size=5000, side=corpus.Side.SOURCE)
    for segment in corpus.make_segments(docs[0], max_sents=15):
        ...
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import AlignmentError, CorpusError, EmptySentence

logger = logging.getLogger(__name__)

DOC_SEPARATOR = "<<<DOC>>>"

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = range(4)

DEFAULT_MAX_LEN = 64

# reserved surfaces stay whole so translated <unk> reads back as one token
_TOKEN_RE = re.compile(
    "|".join([*(re.escape(tok) for tok in RESERVED), r"\w+", r"[^\w\s]"]), re.UNICODE
)

PathLike = Union[str, Path]


class Side(str, Enum):
    SOURCE = "source"
    TARGET = "target"


class Token(NamedTuple):
    surface: str
    id: int


@dataclass(frozen=True)
class Sentence:
    """Token surfaces of one sentence and its 0-based position in the document."""

    tokens: Tuple[str, ...]
    doc_position: int = 0

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    sentences: Tuple[Sentence, ...]
    side: Side

    @property
    def k(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class ParallelDocument:
    source: Document
    target: Document

    def __post_init__(self) -> None:
        if self.source.k != self.target.k:
            raise AlignmentError(
                f"document {self.source.id}: {self.source.k} source sentences "
                f"vs {self.target.k} target sentences"
            )

    @property
    def id(self) -> str:
        return self.source.id

    @property
    def k(self) -> int:
        return self.source.k

    def pairs(self) -> List[Tuple[Sentence, Sentence]]:
        return list(zip(self.source.sentences, self.target.sentences))


@dataclass(frozen=True)
class Segment:
    """A contiguous slice of one document's sentence pairs."""

    doc_id: str
    sentence_pairs: Tuple[Tuple[Sentence, Sentence], ...]
    origin_doc_offset: int
    preceding_source: Optional[Sentence] = None

    def __len__(self) -> int:
        return len(self.sentence_pairs)

    @property
    def sources(self) -> List[Sentence]:
        return [src for src, _ in self.sentence_pairs]

    @property
    def targets(self) -> List[Sentence]:
        return [tgt for _, tgt in self.sentence_pairs]

    def contexts(self) -> List[Optional[Sentence]]:
        """Previous source sentence of every pair (None at the document start)."""
        previous = [self.preceding_source, *self.sources[:-1]]
        return previous


class Vocabulary:
    """Token <-> id bijection with PAD, BOS, EOS, UNK at ids 0..3."""

    def __init__(self, tokens: Iterable[str] = ()) -> None:
        self._itos: List[str] = list(RESERVED)
        self._stoi = {tok: idx for idx, tok in enumerate(self._itos)}
        for tok in tokens:
            if tok in self._stoi:
                continue
            self._stoi[tok] = len(self._itos)
            self._itos.append(tok)

    def __len__(self) -> int:
        return len(self._itos)

    def __contains__(self, surface: object) -> bool:
        return surface in self._stoi

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def __hash__(self) -> int:
        return hash(tuple(self._itos))

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"

    def id(self, surface: str) -> int:
        return self._stoi.get(surface, UNK_ID)

    def surface(self, idx: int) -> str:
        return self._itos[idx]

    def lookup(self, surface: str) -> Token:
        return Token(surface, self.id(surface))

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.id(tok) for tok in tokens]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self._itos[i] for i in ids]

    def to_list(self) -> List[str]:
        return list(self._itos)

    @classmethod
    def from_list(cls, tokens: Sequence[str]) -> Vocabulary:
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise CorpusError(f"vocabulary must start with reserved tokens {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise CorpusError("vocabulary contains duplicate tokens")
        return cls(tokens[len(RESERVED) :])

    def digest(self) -> str:
        """SHA-256 over the ordered token list."""
        return hashlib.sha256("\n".join(self._itos).encode("utf-8")).hexdigest()


def tokenize(line: str, doc_position: int = 0) -> Sentence:
    """
    Lowercase, split on whitespace and split punctuation into separate tokens.

    The reserved surfaces (``<pad>``, ``<s>``, ``</s>``, ``<unk>``) stay single tokens.

    Example:
        >>> tokenize("The cat, sat.").tokens
        ('the', 'cat', ',', 'sat', '.')
    """
    tokens = tuple(_TOKEN_RE.findall(line.lower()))
    if not tokens:
        raise EmptySentence(f"no tokens in line {line!r}")
    return Sentence(tokens, doc_position)


def _read_documents(path: Path, side: Side, max_len: int) -> Tuple[List[List[Sentence]], int]:
    """Split a corpus file into documents; also returns the separator count."""
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FileNotFoundError(f"corpus file not found: {path}") from e

    documents: List[List[Sentence]] = []
    current: List[Sentence] = []
    separators = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == DOC_SEPARATOR:
            separators += 1
            if current:
                documents.append(current)
            current = []
            continue
        try:
            sentence = tokenize(line, doc_position=len(current))
        except EmptySentence as e:
            raise EmptySentence(f"{path}:{lineno}: empty {side.value} sentence") from e
        if len(sentence) > max_len:
            logger.warning(
                "%s:%d: truncating %s sentence from %d to %d tokens",
                path, lineno, side.value, len(sentence), max_len,
            )
            sentence = Sentence(sentence.tokens[:max_len], sentence.doc_position)
        current.append(sentence)
    if current:
        documents.append(current)
    return documents, separators


def load_corpus(
    src_path: PathLike, tgt_path: PathLike, max_len: int = DEFAULT_MAX_LEN
) -> List[ParallelDocument]:
    """
    Load a sentence-aligned parallel corpus split into documents.

    Args:
        src_path: Source-side file.
        tgt_path: Target-side file.
        max_len: Sentences longer than this are truncated (with a warning).

    Returns:
        One ParallelDocument per document, with ids ``doc0``, ``doc1``, ... in file order.

    Raises:
        AlignmentError: If separator, document or sentence counts differ between sides.
        FileNotFoundError: If either file is missing.
    """
    src_docs, src_seps = _read_documents(Path(src_path), Side.SOURCE, max_len)
    tgt_docs, tgt_seps = _read_documents(Path(tgt_path), Side.TARGET, max_len)

    src_count = sum(len(d) for d in src_docs)
    tgt_count = sum(len(d) for d in tgt_docs)
    if src_seps != tgt_seps or len(src_docs) != len(tgt_docs):
        raise AlignmentError(
            f"{src_path} has {len(src_docs)} documents ({src_seps} separators), "
            f"{tgt_path} has {len(tgt_docs)} documents ({tgt_seps} separators)"
        )
    if src_count != tgt_count:
        raise AlignmentError(
            f"{src_path} has {src_count} sentences, {tgt_path} has {tgt_count}"
        )

    parallel = []
    for n, (src, tgt) in enumerate(zip(src_docs, tgt_docs)):
        doc_id = f"doc{n}"
        parallel.append(
            ParallelDocument(
                Document(doc_id, tuple(src), Side.SOURCE),
                Document(doc_id, tuple(tgt), Side.TARGET),
            )
        )
    logger.debug("loaded %d documents, %d sentence pairs", len(parallel), src_count)
    return parallel


def write_corpus(docs: Sequence[ParallelDocument], src_path: PathLike, tgt_path: PathLike) -> None:
    """Write documents in the paired separator format."""
    for path, side in ((Path(src_path), Side.SOURCE), (Path(tgt_path), Side.TARGET)):
        lines: List[str] = []
        for n, doc in enumerate(docs):
            if n:
                lines.append(DOC_SEPARATOR)
            document = doc.source if side is Side.SOURCE else doc.target
            lines.extend(str(s) for s in document.sentences)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_vocab(
    docs: Iterable[ParallelDocument],
    max_size: int,
    min_freq: int = 1,
    side: Side = Side.TARGET,
) -> Vocabulary:
    """
    Keep the most frequent tokens of one side; ties are broken lexicographically.

    The reserved tokens always occupy ids 0..3 and count towards ``max_size``.
    """
    if max_size < len(RESERVED) + 1:
        raise CorpusError(f"max_size must be at least {len(RESERVED) + 1}, got {max_size}")
    counts: Counter = Counter()
    for doc in docs:
        document = doc.source if side is Side.SOURCE else doc.target
        for sentence in document.sentences:
            counts.update(sentence.tokens)
    for reserved in RESERVED:
        counts.pop(reserved, None)
    ranked = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(ranked[: max_size - len(RESERVED)])


def make_segments(doc: ParallelDocument, max_sents: int) -> List[Segment]:
    """Split a document into contiguous segments of at most ``max_sents`` pairs."""
    if max_sents < 1:
        raise CorpusError(f"max_sents must be >= 1, got {max_sents}")
    pairs = doc.pairs()
    segments = []
    for offset in range(0, len(pairs), max_sents):
        preceding = pairs[offset - 1][0] if offset else None
        segments.append(
            Segment(doc.id, tuple(pairs[offset : offset + max_sents]), offset, preceding)
        )
    return segments


def _pack(docs: Sequence[ParallelDocument], max_sents: int) -> Iterator[List[Segment]]:
    batch: List[Segment] = []
    room = max_sents
    for doc in docs:
        pairs = doc.pairs()
        offset = 0
        while offset < len(pairs):
            take = min(room, len(pairs) - offset)
            preceding = pairs[offset - 1][0] if offset else None
            batch.append(Segment(doc.id, tuple(pairs[offset : offset + take]), offset, preceding))
            offset += take
            room -= take
            if room == 0:
                yield batch
                batch, room = [], max_sents
    if batch:
        yield batch


def make_batches(
    docs: Sequence[ParallelDocument], max_sents: int, pack_documents: bool = False
) -> List[List[Segment]]:
    """
    Group sentence pairs into training batches of at most ``max_sents`` sentences.

    Without packing every segment is its own batch. With packing sentences flow
    across documents and a batch holding a document boundary contains one
    segment per document, so rewards never mix documents.
    """
    if max_sents < 1:
        raise CorpusError(f"max_sents must be >= 1, got {max_sents}")
    if pack_documents:
        return list(_pack(docs, max_sents))
    return [[segment] for doc in docs for segment in make_segments(doc, max_sents)]
