"""
Expected-risk training over candidate document blocks.

For a segment, beam search yields ``l`` hypotheses per sentence; block ``i``
collects the rank-``i`` hypothesis of every sentence. Each block is scored by
the mean step log-probability over all of its tokens, the scores are
normalized with a softmax over the blocks, and the loss is the negative
expected reward under that distribution. Rewards are constants with respect
to the model parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from . import policy
from .bleu import bleu_document, bleu_sentence
from .coherence import TopicTable, coherence
from .corpus import Segment, Sentence, Vocabulary
from .errors import ConfigError, MissingReference
from .lexcohesion import ALL_LABELS, RelationDb, RelationLabel, StopList, lexical_cohesion

logger = logging.getLogger(__name__)


class RewardName(str, Enum):
    BLEU_DOC = "bleu_doc"
    BLEU_SEN = "bleu_sen"
    LC_DOC = "lc_doc"
    COH_DOC = "coh_doc"


REFERENCE_REWARDS = frozenset({RewardName.BLEU_DOC, RewardName.BLEU_SEN})


@dataclass(frozen=True)
class RewardSpec:
    rewards: FrozenSet[RewardName]

    def __post_init__(self) -> None:
        if not self.rewards:
            raise ConfigError("reward spec must enable at least one reward")

    def __str__(self) -> str:
        return "+".join(sorted(r.value for r in self.rewards))

    def __contains__(self, name: object) -> bool:
        return name in self.rewards

    @property
    def needs_reference(self) -> bool:
        return bool(self.rewards & REFERENCE_REWARDS)

    @classmethod
    def parse(cls, text: str) -> RewardSpec:
        """Parse ``bleu_doc+lc_doc+coh_doc`` (order- and case-insensitive)."""
        names = [part.strip().lower() for part in text.split("+") if part.strip()]
        try:
            return cls(frozenset(RewardName(n) for n in names))
        except ValueError as e:
            valid = ", ".join(r.value for r in RewardName)
            raise ConfigError(f"unknown reward in {text!r} (valid: {valid})") from e


@dataclass(frozen=True)
class RewardBreakdown:
    values: Mapping[RewardName, float]

    @property
    def total(self) -> float:
        return float(sum(self.values.values()))


@dataclass(frozen=True)
class RiskBatchResult:
    loss: float
    candidate_probs: Tuple[float, ...]
    rewards: Tuple[RewardBreakdown, ...]
    block_tokens: Tuple[int, ...] = ()


@dataclass(frozen=True)
class MetricResources:
    """Shared read-only inputs of the discourse rewards."""

    db: RelationDb = field(default_factory=RelationDb)
    table: Optional[TopicTable] = None
    stop: StopList = field(default_factory=StopList)
    labels: FrozenSet[RelationLabel] = ALL_LABELS
    lc_denominator: str = "content"
    coh_stop: Optional[StopList] = None


class Objective(str, Enum):
    RISK = "risk"
    NLL = "nll"


@dataclass
class MixSchedule:
    """Per-batch Bernoulli choice between Risk (probability ``risk_prob``) and NLL."""

    risk_prob: float
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.risk_prob <= 1.0:
            raise ConfigError(f"risk_prob must be in [0, 1], got {self.risk_prob}")
        self.rng = np.random.default_rng(self.seed)


def next_objective(schedule: MixSchedule) -> Objective:
    return Objective.RISK if schedule.rng.random() < schedule.risk_prob else Objective.NLL


def candidate_probabilities(
    candidates: Union[policy.CandidateSet, Sequence[float]],
) -> List[float]:
    """
    Softmax over mean step log-probabilities.

    Accepts a CandidateSet or the mean log-probabilities themselves.
    """
    if isinstance(candidates, policy.CandidateSet):
        means = [c.mean_logprob for c in candidates]
    else:
        means = list(candidates)
    scores = np.asarray(means, dtype=np.float64)
    weights = np.exp(scores - scores.max())
    return (weights / weights.sum()).tolist()


def segment_reward(
    candidate_block: Sequence[Sentence],
    reference_block: Optional[Sequence[Sentence]],
    spec: RewardSpec,
    resources: MetricResources,
) -> RewardBreakdown:
    """
    Sum of the enabled rewards for one candidate block.

    The reference block is only read when a BLEU reward is enabled. COH is left
    out of the breakdown for blocks with no adjacent sentence pair.

    Raises:
        MissingReference: A BLEU reward is enabled and ``reference_block`` is None.
    """
    if spec.needs_reference and reference_block is None:
        raise MissingReference(f"rewards {spec} need reference sentences")

    values = {}
    if RewardName.LC_DOC in spec:
        values[RewardName.LC_DOC] = lexical_cohesion(
            candidate_block,
            resources.db,
            resources.stop,
            labels=resources.labels,
            denominator=resources.lc_denominator,
        ).value
    if RewardName.COH_DOC in spec:
        if resources.table is None:
            raise ConfigError("coh_doc reward needs a topic table")
        coh = coherence(candidate_block, resources.table, resources.coh_stop)
        if coh.pairs > 0:
            values[RewardName.COH_DOC] = coh.value
    if RewardName.BLEU_DOC in spec and reference_block is not None:
        values[RewardName.BLEU_DOC] = bleu_document(candidate_block, reference_block).value
    if RewardName.BLEU_SEN in spec and reference_block is not None:
        pairs = list(zip(candidate_block, reference_block))
        values[RewardName.BLEU_SEN] = (
            sum(bleu_sentence(h, r).value for h, r in pairs) / len(pairs) if pairs else 0.0
        )
    return RewardBreakdown(values)


def risk_from_candidates(
    model: policy.PolicyModel,
    src_ids: Sequence[Sequence[int]],
    blocks: Sequence[Sequence[Sequence[int]]],
    rewards: Sequence[float],
) -> Tuple[torch.Tensor, torch.Tensor, Tuple[int, ...]]:
    """
    Differentiable risk for fixed candidate blocks.

    Args:
        model: The policy.
        src_ids: Encoder input per sentence.
        blocks: ``blocks[i][j]`` is the target ids (with EOS) of sentence ``j`` in block ``i``.
        rewards: One reward per block.

    Returns:
        (loss, block probabilities, block token counts).
    """
    means = []
    sizes = []
    for block in blocks:
        logprobs = torch.cat(
            [policy.sequence_logprobs(model, src, tgt) for src, tgt in zip(src_ids, block)]
        )
        means.append(logprobs.sum() / logprobs.numel())
        sizes.append(logprobs.numel())
    probs = torch.softmax(torch.stack(means), dim=0)
    r = torch.tensor(list(rewards), dtype=probs.dtype)
    # equals -sum(r * p) since sum(p) == 1
    baseline = r.min()
    loss = -((r - baseline) * probs).sum() - baseline
    return loss, probs, tuple(sizes)


def _sentence(vocab: Vocabulary, candidate: policy.Candidate, position: int) -> Sentence:
    return Sentence(tuple(vocab.decode(candidate.content())), position)


def risk_loss(
    model: policy.PolicyModel,
    segment: Segment,
    spec: RewardSpec,
    beam: int,
    resources: MetricResources,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
) -> Tuple[RiskBatchResult, torch.Tensor]:
    """
    Risk loss of one single-document segment.

    Returns the result summary and the differentiable loss; calling
    ``backward()`` on it (or feeding it to a GradientAccumulator) yields the
    gradients. Rewards are computed on the candidate blocks only, and the
    segment's reference sentences are read only when a BLEU reward needs them.
    """
    contexts = segment.contexts() if model.config.context_sents else [None] * len(segment)
    src_ids = [
        policy.source_ids(src_vocab, src.tokens, ctx.tokens if ctx is not None else None)
        for src, ctx in zip(segment.sources, contexts)
    ]
    beams = [policy.beam_search(model, ids, beam) for ids in src_ids]
    width = max(len(b) for b in beams)

    blocks: List[List[Tuple[int, ...]]] = []
    sentences: List[List[Sentence]] = []
    for rank in range(width):
        picked = [b[rank] if rank < len(b) else b[0] for b in beams]
        blocks.append([c.tokens for c in picked])
        sentences.append(
            [_sentence(tgt_vocab, c, segment.origin_doc_offset + j) for j, c in enumerate(picked)]
        )

    reference = segment.targets if spec.needs_reference else None
    breakdowns = tuple(segment_reward(block, reference, spec, resources) for block in sentences)
    loss, probs, sizes = risk_from_candidates(
        model, src_ids, blocks, [b.total for b in breakdowns]
    )
    result = RiskBatchResult(
        loss=float(loss.detach()),
        candidate_probs=tuple(probs.detach().tolist()),
        rewards=breakdowns,
        block_tokens=sizes,
    )
    return result, loss
