"""
BLEU-4 for single sentences, document blocks and whole corpora.

N-gram extraction and the final geometric mean come from sacrebleu. Sentence,
document and corpus scores smooth higher-order precisions with add-one when no
n-gram of that order matches; the unigram precision is never smoothed.
Scores are on the [0, 1] scale; reports multiply by 100.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

from sacrebleu.metrics.bleu import BLEU
from sacrebleu.metrics.helpers import extract_all_word_ngrams

from .corpus import Sentence

MAX_ORDER = 4

Tokens = Union[Sentence, Sequence[str]]


@dataclass(frozen=True)
class BleuScore:
    value: float
    ngram_precisions: Tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    @property
    def percent(self) -> float:
        return 100.0 * self.value


@dataclass(frozen=True)
class _Stats:
    matches: Tuple[int, ...]
    totals: Tuple[int, ...]
    hyp_len: int
    ref_len: int

    def __add__(self, other: _Stats) -> _Stats:
        return _Stats(
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )


def _tokens(x: Tokens) -> Tuple[str, ...]:
    return x.tokens if isinstance(x, Sentence) else tuple(x)


def _ngrams(tokens: Sequence[str]) -> Tuple[Counter, int]:
    # tokens never contain whitespace, so the joined line splits back to them
    return extract_all_word_ngrams(" ".join(tokens), 1, MAX_ORDER)


def _stats(hyp: Sequence[str], ref: Sequence[str]) -> _Stats:
    hyp_ngrams, hyp_len = _ngrams(hyp)
    ref_ngrams, ref_len = _ngrams(ref)
    matches = [0] * MAX_ORDER
    for gram, count in (hyp_ngrams & ref_ngrams).items():
        matches[len(gram) - 1] += count
    totals = [max(hyp_len - n, 0) for n in range(MAX_ORDER)]
    return _Stats(tuple(matches), tuple(totals), hyp_len, ref_len)


def _smoothed_counts(stats: _Stats) -> Tuple[List[int], List[int]]:
    """Add one to an empty higher order so its precision becomes 1 / (total + 1)."""
    correct, total = list(stats.matches), list(stats.totals)
    for n in range(1, MAX_ORDER):
        if correct[n] == 0:
            correct[n], total[n] = 1, total[n] + 1
    return correct, total


def _score(stats: _Stats) -> BleuScore:
    correct, total = _smoothed_counts(stats)
    result = BLEU.compute_bleu(
        correct, total, stats.hyp_len, stats.ref_len,
        smooth_method="none", max_ngram_order=MAX_ORDER,
    )
    precisions = tuple(p / 100.0 for p in result.precisions)
    value = min(result.score / 100.0, 1.0)
    return BleuScore(value, precisions, result.bp, stats.hyp_len, stats.ref_len)


def bleu_sentence(hyp: Tokens, ref: Tokens) -> BleuScore:
    """
    Smoothed sentence-level BLEU-4.

    Example:
        >>> bleu_sentence("a b c d".split(), "a b c d".split()).value
        1.0
    """
    return _score(_stats(_tokens(hyp), _tokens(ref)))


def bleu_document(hyp_sents: Sequence[Tokens], ref_sents: Sequence[Tokens]) -> BleuScore:
    """BLEU of the concatenated hypothesis block against the concatenated reference block."""
    hyp = [tok for s in hyp_sents for tok in _tokens(s)]
    ref = [tok for s in ref_sents for tok in _tokens(s)]
    return bleu_sentence(hyp, ref)


def bleu_corpus(blocks: Iterable[Tuple[Sequence[Tokens], Sequence[Tokens]]]) -> BleuScore:
    """Corpus BLEU over (hypothesis block, reference block) pairs with pooled statistics."""
    pooled = _Stats((0,) * MAX_ORDER, (0,) * MAX_ORDER, 0, 0)
    for hyp_sents, ref_sents in blocks:
        hyp = [tok for s in hyp_sents for tok in _tokens(s)]
        ref = [tok for s in ref_sents for tok in _tokens(s)]
        pooled = pooled + _stats(hyp, ref)
    return _score(pooled)
