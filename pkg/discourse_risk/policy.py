"""
The translation policy: a small attentional GRU encoder-decoder in float64.

It exposes teacher-forced log-probabilities (for NLL and for re-scoring
candidates under the Risk objective), greedy decoding, length-normalized beam
search, and a JSON checkpoint format that round-trips bit-exactly.

Usage:
    from discourse_risk import policy

    model = policy.init_model(policy.ModelConfig(src_vocab_size=40, tgt_vocab_size=40), seed=1)
    loss = policy.nll_loss(model, src_ids, tgt_ids)
    loss.backward()
    candidates = policy.beam_search(model, src_ids, beam=2)
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import BOS_ID, EOS_ID, PAD_ID, Vocabulary
from .errors import CheckpointError, ConfigError, VocabMismatch

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "discourse-risk-checkpoint"
CHECKPOINT_VERSION = 1
DTYPE = torch.float64

PathLike = Union[str, Path]
State = Tuple[torch.Tensor, torch.Tensor]


@dataclass(frozen=True)
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    max_decode_len: Optional[int] = None
    context_sents: int = 0

    def validate(self) -> None:
        for name in ("src_vocab_size", "tgt_vocab_size", "embed_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.max_decode_len is not None and self.max_decode_len < 1:
            raise ConfigError(f"max_decode_len must be >= 1, got {self.max_decode_len}")
        if self.context_sents not in (0, 1):
            raise ConfigError(f"context_sents must be 0 or 1, got {self.context_sents}")

    def decode_limit(self, src_len: int) -> int:
        if self.max_decode_len is not None:
            return self.max_decode_len
        return 2 * src_len + 5


class PolicyModel(nn.Module):
    """Single-layer GRU encoder, GRU-cell decoder with input feeding and dot-product attention."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        config.validate()
        self.config = config
        E, H = config.embed_dim, config.hidden_dim
        self.src_embed = nn.Embedding(config.src_vocab_size, E)
        self.tgt_embed = nn.Embedding(config.tgt_vocab_size, E)
        self.encoder = nn.GRU(E, H, batch_first=True)
        self.decoder = nn.GRUCell(E + H, H)
        self.combine = nn.Linear(2 * H, H)
        self.out_proj = nn.Linear(H, config.tgt_vocab_size)

    def encode(self, src_ids: Sequence[int]) -> Tuple[torch.Tensor, State]:
        """Encoder states ``[L, H]`` and the initial decoder state for one hypothesis."""
        ids = torch.tensor([list(src_ids)], dtype=torch.long)
        states, last = self.encoder(self.src_embed(ids))
        hidden = last[0]
        attentional = torch.zeros_like(hidden)
        return states[0], (hidden, attentional)

    def step(
        self, prev_tokens: torch.Tensor, state: State, enc_states: torch.Tensor
    ) -> Tuple[torch.Tensor, State]:
        """One decoder step for a batch of hypotheses: log-probs ``[B, V]`` and the next state."""
        hidden, attentional = state
        inputs = torch.cat([self.tgt_embed(prev_tokens), attentional], dim=-1)
        hidden = self.decoder(inputs, hidden)
        weights = torch.softmax(hidden @ enc_states.T, dim=-1)
        context = weights @ enc_states
        attentional = torch.tanh(self.combine(torch.cat([hidden, context], dim=-1)))
        log_probs = F.log_softmax(self.out_proj(attentional), dim=-1)
        return log_probs, (hidden, attentional)


@dataclass(frozen=True)
class Candidate:
    tokens: Tuple[int, ...]
    step_logprobs: Tuple[float, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def mean_logprob(self) -> float:
        return sum(self.step_logprobs) / len(self.step_logprobs)

    def content(self) -> Tuple[int, ...]:
        """Tokens without the trailing EOS."""
        return self.tokens[:-1] if self.tokens and self.tokens[-1] == EOS_ID else self.tokens


@dataclass(frozen=True)
class CandidateSet:
    candidates: Tuple[Candidate, ...]

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.candidates)

    def __getitem__(self, index: int) -> Candidate:
        return self.candidates[index]


@dataclass
class _Hypothesis:
    tokens: Tuple[int, ...] = ()
    logprobs: Tuple[float, ...] = ()
    score: float = 0.0
    state: Optional[State] = field(default=None, repr=False)


class GradientAccumulator:
    """Per-parameter gradient buffers aligned with a model's named parameters."""

    def __init__(self, model: nn.Module) -> None:
        self._params = dict(model.named_parameters())
        self.buffers = {name: torch.zeros_like(p) for name, p in self._params.items()}

    def accumulate(self, loss: torch.Tensor) -> None:
        params = list(self._params.values())
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        for name, grad in zip(self._params, grads):
            if grad is not None:
                self.buffers[name].add_(grad)

    def apply(self, model: nn.Module) -> None:
        for name, param in model.named_parameters():
            param.grad = self.buffers[name].clone()

    def zero(self) -> None:
        for buffer in self.buffers.values():
            buffer.zero_()


def init_model(config: ModelConfig, seed: int) -> PolicyModel:
    """
    Build a model with glorot-uniform matrices and zero biases.

    The global torch RNG is left untouched; the same (config, seed) always
    yields identical parameters.
    """
    config.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = PolicyModel(config).to(DTYPE)
        for param in model.parameters():
            if param.dim() >= 2:
                nn.init.xavier_uniform_(param)
            else:
                nn.init.zeros_(param)
    return model


def source_ids(
    vocab: Vocabulary, tokens: Sequence[str], context: Optional[Sequence[str]] = None
) -> List[int]:
    """Encoder input: optional previous source sentence, the sentence, then EOS."""
    prefix = list(context) if context else []
    return vocab.encode([*prefix, *tokens]) + [EOS_ID]


def target_ids(vocab: Vocabulary, tokens: Sequence[str]) -> List[int]:
    return vocab.encode(tokens) + [EOS_ID]


def sequence_logprobs(
    model: PolicyModel, src_ids: Sequence[int], tgt_ids: Sequence[int]
) -> torch.Tensor:
    """Teacher-forced ``log p(u^j | u^<j, x)`` for every target token; differentiable."""
    enc_states, state = model.encode(src_ids)
    prev = torch.tensor([BOS_ID], dtype=torch.long)
    picked = []
    for token in tgt_ids:
        log_probs, state = model.step(prev, state, enc_states)
        picked.append(log_probs[0, token])
        prev = torch.tensor([token], dtype=torch.long)
    return torch.stack(picked)


def nll_loss(model: PolicyModel, src_ids: Sequence[int], tgt_ids: Sequence[int]) -> torch.Tensor:
    """Mean negative log-likelihood per target token (EOS included)."""
    if not tgt_ids:
        raise ValueError("target must contain at least one token")
    return -sequence_logprobs(model, src_ids, tgt_ids).mean()


def _selectable(log_probs: torch.Tensor, first_step: bool) -> torch.Tensor:
    masked = log_probs.clone()
    masked[:, PAD_ID] = float("-inf")
    masked[:, BOS_ID] = float("-inf")
    if first_step:
        masked[:, EOS_ID] = float("-inf")
    return masked


def beam_search(
    model: PolicyModel,
    src_ids: Sequence[int],
    beam: int,
    max_len: Optional[int] = None,
) -> CandidateSet:
    """
    Length-normalized beam search.

    Live hypotheses all have the same length, so they are ranked by summed
    log-probability while searching; finished ones are ranked by mean step
    log-probability. PAD and BOS are never selected and EOS is not allowed as
    the first token.

    Args:
        model: The policy.
        src_ids: Encoder input ids (see :func:`source_ids`).
        beam: Number of hypotheses to keep.
        max_len: Decode limit; defaults to ``2 * src_len + 5``.

    Returns:
        Up to ``beam`` distinct candidates, best first.
    """
    if beam < 1:
        raise ConfigError(f"beam must be >= 1, got {beam}")
    limit = max_len if max_len is not None else model.config.decode_limit(len(src_ids) - 1)

    with torch.no_grad():
        enc_states, state = model.encode(src_ids)
        live = [_Hypothesis(state=state)]
        finished: List[_Hypothesis] = []
        for step in range(limit):
            room = beam - len(finished)
            if room <= 0 or not live:
                break
            prev = torch.tensor([h.tokens[-1] if h.tokens else BOS_ID for h in live])
            hidden = torch.cat([h.state[0] for h in live if h.state is not None])
            attentional = torch.cat([h.state[1] for h in live if h.state is not None])
            log_probs, (hidden, attentional) = model.step(prev, (hidden, attentional), enc_states)

            scores = torch.tensor([h.score for h in live], dtype=DTYPE).unsqueeze(1)
            totals = (scores + _selectable(log_probs, first_step=step == 0)).flatten()
            order = torch.sort(totals, descending=True, stable=True).indices[:room]

            vocab_size = log_probs.shape[1]
            next_live = []
            for flat in order.tolist():
                if totals[flat] == float("-inf"):
                    break
                row, token = divmod(flat, vocab_size)
                parent = live[row]
                lp = float(log_probs[row, token])
                hyp = _Hypothesis(
                    tokens=parent.tokens + (token,),
                    logprobs=parent.logprobs + (lp,),
                    score=parent.score + lp,
                    state=(hidden[row : row + 1], attentional[row : row + 1]),
                )
                if token == EOS_ID or len(hyp.tokens) >= limit:
                    finished.append(hyp)
                else:
                    next_live.append(hyp)
            live = next_live
        finished.extend(live)

    ranked = sorted(finished, key=lambda h: -h.score / len(h.tokens))
    unique: List[Candidate] = []
    seen = set()
    for hyp in ranked:
        if hyp.tokens in seen:
            continue
        seen.add(hyp.tokens)
        unique.append(Candidate(hyp.tokens, hyp.logprobs))
        if len(unique) == beam:
            break
    return CandidateSet(tuple(unique))


def greedy_decode(
    model: PolicyModel, src_ids: Sequence[int], max_len: Optional[int] = None
) -> Candidate:
    """Pick the most probable allowed token at every step (a beam of one)."""
    return beam_search(model, src_ids, 1, max_len)[0]


# --- checkpoints -----------------------------------------------------------


@dataclass
class Checkpoint:
    model: PolicyModel
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    meta: Dict[str, Any] = field(default_factory=dict)


def _vocab_entry(vocab: Vocabulary) -> Dict[str, Any]:
    return {"tokens": vocab.to_list(), "sha256": vocab.digest()}


def checkpoint_payload(checkpoint: Checkpoint) -> Dict[str, Any]:
    params = {
        name: {"shape": list(tensor.shape), "values": tensor.detach().flatten().tolist()}
        for name, tensor in checkpoint.model.state_dict().items()
    }
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(checkpoint.model.config),
        "vocab": {
            "source": _vocab_entry(checkpoint.src_vocab),
            "target": _vocab_entry(checkpoint.tgt_vocab),
        },
        "parameters": params,
        "meta": checkpoint.meta,
    }


def save_checkpoint(checkpoint: Checkpoint, path: PathLike) -> Path:
    """Write a JSON checkpoint with sorted keys; floats use their shortest exact repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(checkpoint_payload(checkpoint), sort_keys=True, separators=(",", ":"))
    path.write_text(text + "\n", encoding="utf-8")
    logger.debug("saved checkpoint %s", path)
    return path


def _load_vocab(entry: Dict[str, Any], side: str, path: Path) -> Vocabulary:
    vocab = Vocabulary.from_list(entry["tokens"])
    if vocab.digest() != entry["sha256"]:
        raise VocabMismatch(f"{path}: {side} vocabulary does not match its recorded digest")
    return vocab


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        CheckpointError: Unknown format/version or missing fields.
        VocabMismatch: Stored vocabularies disagree with their digests.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise FileNotFoundError(f"checkpoint not found: {path}") from e
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: not a JSON checkpoint ({e})") from e

    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {payload.get('format')!r}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")

    try:
        config = ModelConfig(**payload["config"])
        src_vocab = _load_vocab(payload["vocab"]["source"], "source", path)
        tgt_vocab = _load_vocab(payload["vocab"]["target"], "target", path)
        state = {
            name: torch.tensor(entry["values"], dtype=DTYPE).reshape(entry["shape"])
            for name, entry in payload["parameters"].items()
        }
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"{path}: malformed checkpoint ({e})") from e

    if (config.src_vocab_size, config.tgt_vocab_size) != (len(src_vocab), len(tgt_vocab)):
        raise VocabMismatch(f"{path}: vocabulary sizes disagree with the model config")

    model = PolicyModel(config).to(DTYPE)
    model.load_state_dict(state)
    return Checkpoint(model, src_vocab, tgt_vocab, dict(payload.get("meta", {})))
