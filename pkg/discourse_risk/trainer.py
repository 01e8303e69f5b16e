"""
Training loops: NLL pretraining, mixed Risk/NLL fine-tuning with learning-rate
annealing, validation-based model selection, and file translation.

Usage:
    from discourse_risk.config import build_config
    from discourse_risk import trainer

    config = build_config("exp.conf")
    init = trainer.pretrain_nll(config)
    best = trainer.finetune_risk(config.replace(risk_prob=1.0, rewards="lc_doc"), init)
    trainer.translate(best, "test.src", "test.out", beam=2)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from tqdm import tqdm

from . import policy
from .coherence import load_topic_table
from .config import TrainConfig
from .corpus import (
    DOC_SEPARATOR,
    ParallelDocument,
    Segment,
    Sentence,
    Side,
    Vocabulary,
    build_vocab,
    load_corpus,
    make_batches,
    tokenize,
)
from .errors import ConfigError, EmptySentence, VocabMismatch
from .lexcohesion import RelationDb, StopList, load_relation_db, load_stoplist, parse_labels
from .reporting import ValidationRecord, corpus_scores
from .risk import (
    MetricResources,
    MixSchedule,
    Objective,
    RewardName,
    RewardSpec,
    next_objective,
    risk_loss,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ADAM_BETAS = (0.9, 0.998)


class SelectionRule(str, Enum):
    PERPLEXITY = "perplexity"
    MAJORITY_METRICS = "majority_metrics"


_SELECTION_METRICS = ("bleu_doc", "lc", "coh")


def select_record(
    records: Sequence[ValidationRecord], rule: SelectionRule
) -> ValidationRecord:
    """
    Pick the validation record whose checkpoint becomes the stage result.

    ``perplexity`` takes the lowest perplexity. ``majority_metrics`` takes the
    record that is best on the most of BLEU_doc, LC and COH; ties go to the
    higher BLEU_doc, then to the earlier record.
    """
    if not records:
        raise ValueError("no validation records to select from")
    if rule is SelectionRule.PERPLEXITY:
        return min(records, key=lambda r: (r.perplexity, r.iteration))

    best = {m: max(getattr(r, m) for r in records) for m in _SELECTION_METRICS}

    def wins(record: ValidationRecord) -> int:
        return sum(getattr(record, m) >= best[m] for m in _SELECTION_METRICS)

    ranked = sorted(
        enumerate(records), key=lambda item: (-wins(item[1]), -item[1].bleu_doc, item[0])
    )
    return ranked[0][1]


class AnnealEvent(str, Enum):
    NONE = "none"
    HALVED = "halved"
    STOP = "stop"


@dataclass
class Annealer:
    """
    Halve the learning rate when validation perplexity stops improving.

    A validation improves when its perplexity is below ``best * (1 - min_improvement)``.
    After ``patience`` validations without improvement the rate is halved;
    once ``max_halvings`` halvings are used up the next plateau stops training.
    """

    learning_rate: float
    max_halvings: int = 5
    patience: int = 2
    min_improvement: float = 0.001
    halvings: int = 0
    best: Optional[float] = None
    stale: int = field(default=0, init=False)

    def observe(self, perplexity: float) -> AnnealEvent:
        if self.best is None or perplexity < self.best * (1.0 - self.min_improvement):
            self.best = perplexity
            self.stale = 0
            return AnnealEvent.NONE
        self.stale += 1
        if self.stale < self.patience:
            return AnnealEvent.NONE
        self.stale = 0
        if self.halvings >= self.max_halvings:
            return AnnealEvent.STOP
        self.halvings += 1
        self.learning_rate /= 2.0
        return AnnealEvent.HALVED


def load_resources(
    relations: Optional[PathLike] = None,
    topics: Optional[PathLike] = None,
    stoplist: Optional[PathLike] = None,
    lc_labels: str = "",
    lc_denominator: str = "content",
    coh_remove_stopwords: bool = False,
) -> MetricResources:
    """Load the relation DB, topic table and stoplist shared by rewards and reports."""
    if relations:
        db = load_relation_db(relations)
    else:
        logger.warning("no relation database configured; LC counts repetitions only")
        db = RelationDb()
    stop = load_stoplist(stoplist) if stoplist else StopList.empty()
    table = load_topic_table(topics) if topics else None
    return MetricResources(
        db=db,
        table=table,
        stop=stop,
        labels=parse_labels(lc_labels),
        lc_denominator=lc_denominator,
        coh_stop=stop if coh_remove_stopwords else None,
    )


def resources_from_config(config: TrainConfig) -> MetricResources:
    return load_resources(
        config.relations,
        config.topics,
        config.stoplist,
        lc_labels=config.lc_labels,
        lc_denominator=config.lc_denominator,
        coh_remove_stopwords=config.coh_remove_stopwords,
    )


def _source_inputs(
    sources: Sequence[Sentence],
    vocab: Vocabulary,
    context_sents: int,
    preceding: Optional[Sentence] = None,
) -> List[List[int]]:
    inputs = []
    previous = preceding
    for src in sources:
        context = previous.tokens if context_sents and previous is not None else None
        inputs.append(policy.source_ids(vocab, src.tokens, context))
        previous = src
    return inputs


def translate_document(
    model: policy.PolicyModel,
    sources: Sequence[Sentence],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    beam: int = 1,
) -> List[Sentence]:
    """Translate one document sentence by sentence; the best candidate wins."""
    outputs = []
    inputs = _source_inputs(sources, src_vocab, model.config.context_sents)
    for position, ids in enumerate(inputs):
        best = policy.beam_search(model, ids, beam)[0]
        outputs.append(Sentence(tuple(tgt_vocab.decode(best.content())), position))
    return outputs


def perplexity(
    model: policy.PolicyModel,
    docs: Sequence[ParallelDocument],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
) -> float:
    """exp of the token-level NLL over all target tokens, EOS included."""
    total_nll = 0.0
    total_tokens = 0
    with torch.no_grad():
        for doc in docs:
            inputs = _source_inputs(doc.source.sentences, src_vocab, model.config.context_sents)
            for ids, tgt in zip(inputs, doc.target.sentences):
                logprobs = policy.sequence_logprobs(
                    model, ids, policy.target_ids(tgt_vocab, tgt.tokens)
                )
                total_nll -= float(logprobs.sum())
                total_tokens += logprobs.numel()
    return math.exp(total_nll / max(total_tokens, 1))


class Trainer:
    """
    Shared machinery of one training stage: batches, optimizer, validation and
    checkpoints under ``ckpt_dir``.
    """

    def __init__(
        self,
        config: TrainConfig,
        stage: str,
        model: policy.PolicyModel,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        train_docs: Sequence[ParallelDocument],
        valid_docs: Sequence[ParallelDocument],
        resources: MetricResources,
    ) -> None:
        self.config = config
        self.stage = stage
        self.model = model
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.valid_docs = list(valid_docs)
        self.resources = resources
        self.batches = make_batches(train_docs, config.max_batch_sentences, config.pack_documents)
        self.optimizer = torch.optim.Adam(
            model.parameters(),
            lr=config.learning_rate,
            betas=ADAM_BETAS,
        )
        self.accumulator = policy.GradientAccumulator(model)
        self.rng = np.random.default_rng([config.seed, 1])
        self.iteration = 0
        self.records: List[ValidationRecord] = []
        self.ckpt_dir = Path(config.ckpt_dir)
        self.ckpt_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.ckpt_dir / f"{stage}-log.jsonl"
        self.log_path.write_text("", encoding="utf-8")

    @property
    def learning_rate(self) -> float:
        return float(self.optimizer.param_groups[0]["lr"])

    @learning_rate.setter
    def learning_rate(self, value: float) -> None:
        for group in self.optimizer.param_groups:
            group["lr"] = value

    def epoch_batches(self) -> List[List[Segment]]:
        if not self.config.shuffle:
            return list(self.batches)
        return [self.batches[i] for i in self.rng.permutation(len(self.batches))]

    def _update(self, loss: torch.Tensor) -> None:
        self.accumulator.zero()
        self.accumulator.accumulate(loss)
        self.accumulator.apply(self.model)
        self.optimizer.step()

    def nll_step(self, batch: Sequence[Segment]) -> float:
        """One NLL update; the loss is the mean NLL per target token of the batch."""
        picked = []
        for segment in batch:
            inputs = _source_inputs(
                segment.sources,
                self.src_vocab,
                self.model.config.context_sents,
                segment.preceding_source,
            )
            for ids, tgt in zip(inputs, segment.targets):
                picked.append(
                    policy.sequence_logprobs(
                        self.model, ids, policy.target_ids(self.tgt_vocab, tgt.tokens)
                    )
                )
        loss = -torch.cat(picked).mean()
        self._update(loss)
        return float(loss.detach())

    def risk_step(self, batch: Sequence[Segment], spec: RewardSpec) -> float:
        """One Risk update; the batch loss sums the per-document segment losses."""
        losses = []
        for segment in batch:
            _, loss = risk_loss(
                self.model,
                segment,
                spec,
                self.config.beam,
                self.resources,
                self.src_vocab,
                self.tgt_vocab,
            )
            losses.append(loss)
        total = torch.stack(losses).sum()
        self._update(total)
        return float(total.detach())

    def checkpoint_meta(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "iteration": self.iteration,
            "learning_rate": self.learning_rate,
            "seed": self.config.seed,
        }

    def validate(self) -> ValidationRecord:
        """Score the validation set, save a checkpoint and append a log record."""
        ppl = perplexity(self.model, self.valid_docs, self.src_vocab, self.tgt_vocab)
        hypotheses = [
            translate_document(
                self.model,
                doc.source.sentences,
                self.src_vocab,
                self.tgt_vocab,
                self.config.valid_beam,
            )
            for doc in self.valid_docs
        ]
        report = corpus_scores(
            [d.id for d in self.valid_docs],
            hypotheses,
            [list(d.target.sentences) for d in self.valid_docs],
            self.resources,
        )
        name = f"{self.stage}-{self.iteration:06d}.json"
        policy.save_checkpoint(
            policy.Checkpoint(self.model, self.src_vocab, self.tgt_vocab, self.checkpoint_meta()),
            self.ckpt_dir / name,
        )
        record = ValidationRecord(
            iteration=self.iteration,
            bleu_doc=report.bleu_doc,
            lc=report.lc,
            coh=report.coh,
            perplexity=ppl,
            learning_rate=self.learning_rate,
            checkpoint=name,
        )
        with self.log_path.open("a", encoding="utf-8") as handle:
            handle.write(record.to_json() + "\n")
        self.records.append(record)
        logger.info("%s %s", self.stage, record.log_line())
        return record

    def due(self) -> bool:
        every = self.config.validate_every
        return every > 0 and self.iteration % every == 0

    def checkpoint_path(self, record: ValidationRecord) -> Path:
        assert record.checkpoint is not None
        return self.ckpt_dir / record.checkpoint

    def progress(self, batches: List[List[Segment]], epoch: int) -> Any:
        return tqdm(
            batches,
            desc=f"{self.stage} epoch {epoch}",
            disable=not self.config.progress,
            leave=False,
        )


def _load_splits(
    config: TrainConfig,
) -> Tuple[List[ParallelDocument], List[ParallelDocument]]:
    config.require_paths("train_src", "train_tgt")
    train = load_corpus(str(config.train_src), str(config.train_tgt), config.max_len)
    if config.valid_src and config.valid_tgt:
        config.require_paths("valid_src", "valid_tgt")
        valid = load_corpus(config.valid_src, config.valid_tgt, config.max_len)
    else:
        logger.warning("no validation corpus configured; validating on the training set")
        valid = train
    return train, valid


def _vocabularies(
    config: TrainConfig, train: Sequence[ParallelDocument]
) -> Tuple[Vocabulary, Vocabulary]:
    return (
        build_vocab(train, config.max_vocab, config.min_freq, Side.SOURCE),
        build_vocab(train, config.max_vocab, config.min_freq, Side.TARGET),
    )


def pretrain_nll(config: TrainConfig) -> Path:
    """
    Train a policy from scratch with the NLL objective.

    Validates after every epoch (or every ``validate_every`` batches), writes a
    checkpoint per validation and returns the one with the lowest validation
    perplexity.

    Raises:
        ConfigError: Invalid configuration or missing corpus paths.
    """
    config.validate()
    train, valid = _load_splits(config)
    src_vocab, tgt_vocab = _vocabularies(config, train)
    model = policy.init_model(
        policy.ModelConfig(
            src_vocab_size=len(src_vocab),
            tgt_vocab_size=len(tgt_vocab),
            embed_dim=config.embed_dim,
            hidden_dim=config.hidden_dim,
            context_sents=config.context_sents,
        ),
        seed=config.seed,
    )
    logger.info(
        "pretraining on %d documents (vocab %d/%d)", len(train), len(src_vocab), len(tgt_vocab)
    )
    trainer = Trainer(
        config, "pretrain", model, src_vocab, tgt_vocab, train, valid, resources_from_config(config)
    )

    for epoch in range(1, config.epochs + 1):
        for batch in trainer.progress(trainer.epoch_batches(), epoch):
            trainer.iteration += 1
            trainer.nll_step(batch)
            if trainer.due():
                trainer.validate()
        if config.validate_every == 0:
            trainer.validate()

    if not trainer.records:
        trainer.validate()
    best = select_record(trainer.records, SelectionRule.PERPLEXITY)
    logger.info("selected pretrain checkpoint %s (ppl %.3f)", best.checkpoint, best.perplexity)
    return trainer.checkpoint_path(best)


def finetune_risk(config: TrainConfig, init_checkpoint: PathLike) -> Path:
    """
    Fine-tune a pretrained policy, drawing Risk or NLL per batch.

    The init checkpoint is logged as iteration 0. On a validation-perplexity
    plateau the learning rate is halved, at most ``annealing_steps`` times,
    after which the next plateau ends training. The returned checkpoint is the
    fine-tuned record chosen by majority of BLEU_doc, LC and COH.

    Raises:
        ConfigError: Invalid configuration, or COH reward without a topic table.
        VocabMismatch: The training corpus yields vocabularies other than the checkpoint's.
    """
    config.validate()
    spec = config.reward_spec
    if RewardName.COH_DOC in spec and not config.topics:
        raise ConfigError("coh_doc reward needs a topic table (--topics)")

    init = policy.load_checkpoint(init_checkpoint)
    train, valid = _load_splits(config)
    src_vocab, tgt_vocab = _vocabularies(config, train)
    for side, built, stored in (
        ("source", src_vocab, init.src_vocab),
        ("target", tgt_vocab, init.tgt_vocab),
    ):
        if built.digest() != stored.digest():
            raise VocabMismatch(
                f"{init_checkpoint}: {side} vocabulary differs from the one built from "
                f"{config.train_src if side == 'source' else config.train_tgt}"
            )
    if init.model.config.context_sents != config.context_sents:
        logger.warning(
            "context_sents=%d ignored; the checkpoint was trained with %d",
            config.context_sents,
            init.model.config.context_sents,
        )

    trainer = Trainer(
        config,
        "finetune",
        init.model,
        src_vocab,
        tgt_vocab,
        train,
        valid,
        resources_from_config(config),
    )
    schedule = MixSchedule(config.risk_prob, seed=config.seed)
    annealer = Annealer(
        config.learning_rate,
        max_halvings=config.annealing_steps,
        patience=config.patience,
        min_improvement=config.min_improvement,
    )
    annealer.observe(trainer.validate().perplexity)
    logger.info("fine-tuning with rewards %s, risk probability %.2f", spec, config.risk_prob)

    stopped = False
    counts = {Objective.RISK: 0, Objective.NLL: 0}
    for epoch in range(1, config.epochs + 1):
        for batch in trainer.progress(trainer.epoch_batches(), epoch):
            trainer.iteration += 1
            objective = next_objective(schedule)
            counts[objective] += 1
            if objective is Objective.RISK:
                trainer.risk_step(batch, spec)
            else:
                trainer.nll_step(batch)
            if trainer.due() and _anneal(trainer, annealer):
                stopped = True
                break
        if stopped:
            break
        if config.validate_every == 0 and _anneal(trainer, annealer):
            break

    logger.info("objectives drawn: risk=%d nll=%d", counts[Objective.RISK], counts[Objective.NLL])
    finetuned = trainer.records[1:] or trainer.records
    best = select_record(finetuned, SelectionRule.MAJORITY_METRICS)
    logger.info("selected fine-tuned checkpoint %s", best.checkpoint)
    return trainer.checkpoint_path(best)


def _anneal(trainer: Trainer, annealer: Annealer) -> bool:
    """Validate, apply the annealing decision; True when training should stop."""
    event = annealer.observe(trainer.validate().perplexity)
    if event is AnnealEvent.HALVED:
        trainer.learning_rate = annealer.learning_rate
        logger.info(
            "plateau: learning rate halved to %.2e (%d/%d)",
            annealer.learning_rate,
            annealer.halvings,
            annealer.max_halvings,
        )
    elif event is AnnealEvent.STOP:
        logger.info("plateau after %d halvings: stopping", annealer.halvings)
        return True
    return False


def translate(
    checkpoint: PathLike, src_path: PathLike, out_path: PathLike, beam: int = 1
) -> Path:
    """
    Translate a source corpus file line by line.

    Separator lines are copied through and reset the context sentence, so the
    output has the same document structure as the input.

    Raises:
        EmptySentence: A blank non-separator line (with its line number).
        ConfigError: ``beam < 1``.
    """
    if beam < 1:
        raise ConfigError(f"beam must be >= 1, got {beam}")
    ckpt = policy.load_checkpoint(checkpoint)
    model = ckpt.model
    src_path, out_path = Path(src_path), Path(out_path)
    try:
        lines = src_path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise FileNotFoundError(f"source file not found: {src_path}") from e

    out_path.parent.mkdir(parents=True, exist_ok=True)
    previous: Optional[Sentence] = None
    sentences = 0
    with out_path.open("w", encoding="utf-8") as out, torch.no_grad():
        for lineno, line in enumerate(lines, start=1):
            if line.strip() == DOC_SEPARATOR:
                out.write(DOC_SEPARATOR + "\n")
                previous = None
                continue
            try:
                sentence = tokenize(line)
            except EmptySentence as e:
                raise EmptySentence(f"{src_path}:{lineno}: empty source sentence") from e
            context = previous if model.config.context_sents else None
            ids = policy.source_ids(
                ckpt.src_vocab, sentence.tokens, context.tokens if context else None
            )
            best = policy.beam_search(model, ids, beam)[0]
            text = " ".join(ckpt.tgt_vocab.decode(best.content()))
            if not text:
                logger.warning("%s:%d: empty hypothesis", src_path, lineno)
            out.write(text + "\n")
            previous = sentence
            sentences += 1
    logger.info("translated %d sentences into %s", sentences, out_path)
    return out_path
