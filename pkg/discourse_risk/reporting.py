"""
Evaluation reports: per-document and corpus BLEU_doc / LC / COH, and reward
curves extracted from training logs. Reports use percentage points with two
decimals.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Union

from .bleu import bleu_corpus, bleu_document
from .coherence import coherence
from .corpus import Sentence, load_corpus
from .lexcohesion import lexical_cohesion
from .risk import MetricResources

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CURVE_COLUMNS = ("iteration", "BLEU_doc", "LC", "COH", "perplexity", "learning_rate")


@dataclass(frozen=True)
class DocumentScores:
    doc_id: str
    bleu_doc: float
    lc: float
    coh: float
    coh_pairs: int


@dataclass(frozen=True)
class ScoreReport:
    documents: List[DocumentScores]
    bleu_doc: float
    lc: float
    coh: float

    def to_tsv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
        writer.writerow(["doc_id", "bleu_doc", "lc", "coh"])
        for doc in self.documents:
            writer.writerow([doc.doc_id, _pp(doc.bleu_doc), _pp(doc.lc), _pp(doc.coh)])
        writer.writerow(["corpus", _pp(self.bleu_doc), _pp(self.lc), _pp(self.coh)])
        return buffer.getvalue()

    def summary(self) -> str:
        return (
            f"✓ {len(self.documents)} documents: "
            f"BLEU_doc {_pp(self.bleu_doc)}  LC {_pp(self.lc)}  COH {_pp(self.coh)}"
        )


def _pp(value: float) -> str:
    return f"{100.0 * value:.2f}"


def corpus_scores(
    doc_ids: Sequence[str],
    hypotheses: Sequence[Sequence[Sentence]],
    references: Sequence[Sequence[Sentence]],
    resources: MetricResources,
) -> ScoreReport:
    """
    Score hypothesis documents against reference documents.

    Corpus BLEU pools n-gram statistics over documents; corpus LC is the mean
    document LC; corpus COH is the mean over documents with at least one
    adjacent sentence pair (0 when there is none, or no topic table).
    """
    rows = []
    for doc_id, hyp, ref in zip(doc_ids, hypotheses, references):
        lc = lexical_cohesion(
            hyp,
            resources.db,
            resources.stop,
            labels=resources.labels,
            denominator=resources.lc_denominator,
        )
        if resources.table is not None:
            coh = coherence(hyp, resources.table, resources.coh_stop)
            coh_value, pairs = coh.value, coh.pairs
        else:
            coh_value, pairs = 0.0, 0
        rows.append(
            DocumentScores(doc_id, bleu_document(hyp, ref).value, lc.value, coh_value, pairs)
        )

    bleu = bleu_corpus(zip(hypotheses, references)).value if rows else 0.0
    lc_mean = sum(r.lc for r in rows) / len(rows) if rows else 0.0
    scored = [r.coh for r in rows if r.coh_pairs > 0]
    coh_mean = sum(scored) / len(scored) if scored else 0.0
    return ScoreReport(rows, bleu, lc_mean, coh_mean)


def score(
    hyp_path: PathLike,
    ref_path: PathLike,
    resources: MetricResources,
    out: Optional[TextIO] = None,
) -> ScoreReport:
    """
    Score a translated corpus file against its reference file.

    Lines are scored in full; the training-time ``max_len`` cut does not apply.

    Raises:
        AlignmentError: Document or sentence counts differ.
    """
    docs = load_corpus(hyp_path, ref_path, max_len=sys.maxsize)
    report = corpus_scores(
        [d.id for d in docs],
        [list(d.source.sentences) for d in docs],
        [list(d.target.sentences) for d in docs],
        resources,
    )
    if out is not None:
        out.write(report.to_tsv())
    return report


@dataclass(frozen=True)
class ValidationRecord:
    iteration: int
    bleu_doc: float
    lc: float
    coh: float
    perplexity: float
    learning_rate: float
    checkpoint: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> ValidationRecord:
        return cls(**json.loads(line))

    def log_line(self) -> str:
        return (
            f"iter={self.iteration:06d} ppl={self.perplexity:.3f} bleu={_pp(self.bleu_doc)} "
            f"lc={_pp(self.lc)} coh={_pp(self.coh)} lr={self.learning_rate:.2e}"
        )


def read_training_log(path: PathLike) -> List[ValidationRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise FileNotFoundError(f"training log not found: {path}") from e
    return [ValidationRecord.from_json(line) for line in lines if line.strip()]


def reward_curves(training_log: PathLike, out_csv: PathLike) -> List[Dict[str, float]]:
    """
    Convert a training log into a CSV of validation curves.

    Columns: iteration, BLEU_doc, LC, COH (percentage points), perplexity,
    learning_rate. One row per validation pass.
    """
    records = read_training_log(training_log)
    rows = []
    for rec in records:
        row = {
            "iteration": rec.iteration,
            "BLEU_doc": round(100.0 * rec.bleu_doc, 2),
            "LC": round(100.0 * rec.lc, 2),
            "COH": round(100.0 * rec.coh, 2),
            "perplexity": rec.perplexity,
            "learning_rate": rec.learning_rate,
        }
        if not all(math.isfinite(float(v)) for v in row.values()):
            logger.warning("non-finite metric at iteration %d", rec.iteration)
        rows.append(row)

    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CURVE_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    logger.info("wrote %d validation rows to %s", len(rows), out_csv)
    return rows
