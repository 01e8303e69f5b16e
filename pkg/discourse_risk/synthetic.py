"""
Synthetic parallel corpora for desk-scale experiments.

``copy``
    The target equals the source over a small vocabulary. A model that can
    learn anything should overfit it.

``cohesion``
    Every document has a latent topic. Source sentences carry topic markers
    (``m{t}a`` / ``m{t}b``); the reference renders a marker either as a generic
    word keyed on the sentence's first word (the more frequent choice) or as
    the topic's variant word (``t{t}a`` / ``t{t}b``). The two variants of a
    topic are synonyms in the emitted relation database and sit close together
    in the emitted topic table, so a policy that prefers them raises LC and COH
    while losing BLEU against the references.

Usage:
    from discourse_risk.synthetic import gen_synthetic

    paths = gen_synthetic("cohesion", "data/", docs=60, sents_per_doc=5, seed=1)
    paths["train_src"], paths["relations"], paths["topics"]
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from .corpus import Document, ParallelDocument, Sentence, Side, write_corpus
from .errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

KINDS = ("copy", "cohesion")

COPY_WORDS = 16
COPY_LEN = (3, 6)

TOPICS = 3
FILLERS = 24
GENERICS = 8
TOPIC_FILLERS = 8
TOPIC_DIM = 8
SENT_LEN = (4, 7)
MARKER_PROB = 0.7
GENERIC_PROB = 0.55
TOPIC_FILLER_PROB = 0.5


def _document(doc_id: str, pairs: List[Tuple[List[str], List[str]]]) -> ParallelDocument:
    src = tuple(Sentence(tuple(s), i) for i, (s, _) in enumerate(pairs))
    tgt = tuple(Sentence(tuple(t), i) for i, (_, t) in enumerate(pairs))
    return ParallelDocument(Document(doc_id, src, Side.SOURCE), Document(doc_id, tgt, Side.TARGET))


def _copy_documents(
    rng: np.random.Generator, docs: int, sents_per_doc: int
) -> List[ParallelDocument]:
    words = [f"c{i:02d}" for i in range(COPY_WORDS)]
    out = []
    for n in range(docs):
        pairs = []
        for _ in range(sents_per_doc):
            length = int(rng.integers(COPY_LEN[0], COPY_LEN[1] + 1))
            tokens = [words[i] for i in rng.integers(0, COPY_WORDS, size=length)]
            pairs.append((tokens, list(tokens)))
        out.append(_document(f"doc{n}", pairs))
    return out


def _cohesion_sentence(
    rng: np.random.Generator, topic: int
) -> Tuple[List[str], List[str]]:
    length = int(rng.integers(SENT_LEN[0], SENT_LEN[1] + 1))
    favoured = np.arange(topic * TOPIC_FILLERS, (topic + 1) * TOPIC_FILLERS) % FILLERS
    fillers = []
    for _ in range(length):
        if rng.random() < TOPIC_FILLER_PROB:
            fillers.append(int(rng.choice(favoured)))
        else:
            fillers.append(int(rng.integers(FILLERS)))
    src = [f"s{i:02d}" for i in fillers]
    tgt = [f"w{i:02d}" for i in fillers]
    if rng.random() < MARKER_PROB:
        variant = "ab"[int(rng.integers(2))]
        position = int(rng.integers(1, length + 1))
        if rng.random() < GENERIC_PROB:
            rendered = f"gen{fillers[0] % GENERICS}"
        else:
            rendered = f"t{topic}{variant}"
        src.insert(position, f"m{topic}{variant}")
        tgt.insert(position, rendered)
    return src, tgt


def _cohesion_documents(
    rng: np.random.Generator, docs: int, sents_per_doc: int
) -> List[ParallelDocument]:
    out = []
    for n in range(docs):
        topic = int(rng.integers(TOPICS))
        pairs = [_cohesion_sentence(rng, topic) for _ in range(sents_per_doc)]
        out.append(_document(f"doc{n}", pairs))
    return out


def cohesion_target_words() -> List[str]:
    return (
        [f"w{i:02d}" for i in range(FILLERS)]
        + [f"gen{i}" for i in range(GENERICS)]
        + [f"t{t}{v}" for t in range(TOPICS) for v in "ab"]
    )


def _write_relations(path: Path) -> None:
    lines = ["# topic variants"]
    lines.extend(f"t{t}a\tsynonym\tt{t}b" for t in range(TOPICS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_topics(path: Path, rng: np.random.Generator) -> None:
    centres = rng.normal(size=(TOPICS, TOPIC_DIM))
    rows = []
    for word in cohesion_target_words():
        if word.startswith("t") and word[1:-1].isdigit():
            vector = centres[int(word[1:-1])] + 0.1 * rng.normal(size=TOPIC_DIM)
        else:
            vector = rng.normal(size=TOPIC_DIM)
        rows.append(word + " " + " ".join(f"{v:.6f}" for v in vector))
    header = f"{len(rows)} {TOPIC_DIM}"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")


def gen_synthetic(
    kind: str,
    out_dir: PathLike,
    docs: int = 40,
    sents_per_doc: int = 5,
    seed: int = 1,
) -> Dict[str, Path]:
    """
    Write train/valid/test splits (and resources for ``cohesion``) to ``out_dir``.

    The training split has ``docs`` documents; validation and test splits get
    a fifth of that (at least two documents each). The same arguments always
    produce byte-identical files.

    Args:
        kind: ``copy`` or ``cohesion``.
        out_dir: Output directory (created if missing).
        docs: Training documents.
        sents_per_doc: Sentences per document.
        seed: Generator seed.

    Returns:
        Paths keyed ``train_src``, ``train_tgt``, ``valid_src``, ... plus
        ``relations`` and ``topics`` for ``cohesion``.

    Raises:
        ConfigError: Unknown kind or sizes below 1.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown synthetic corpus kind {kind!r} (valid: {', '.join(KINDS)})")
    if docs < 1 or sents_per_doc < 1:
        raise ConfigError(f"sizes must be >= 1, got docs={docs} sents_per_doc={sents_per_doc}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    make = _copy_documents if kind == "copy" else _cohesion_documents
    held_out = max(2, docs // 5)

    paths: Dict[str, Path] = {}
    for split, count in (("train", docs), ("valid", held_out), ("test", held_out)):
        src, tgt = out / f"{split}.src", out / f"{split}.tgt"
        write_corpus(make(rng, count, sents_per_doc), src, tgt)
        paths[f"{split}_src"], paths[f"{split}_tgt"] = src, tgt

    if kind == "cohesion":
        paths["relations"] = out / "relations.tsv"
        paths["topics"] = out / "topics.vec"
        _write_relations(paths["relations"])
        _write_topics(paths["topics"], rng)

    logger.info(
        "wrote %s corpus to %s (%d train documents x %d sentences)",
        kind, out, docs, sents_per_doc,
    )
    return paths
