"""Shared fixtures for the discourse-risk test suite."""

from pathlib import Path
from typing import Callable, List, Sequence

import numpy as np
import pytest
import torch

from discourse_risk.config import TrainConfig
from discourse_risk.corpus import Sentence, Vocabulary
from discourse_risk.policy import ModelConfig, PolicyModel, init_model


def sentences(*lines: str) -> List[Sentence]:
    """Whitespace-split blocks, one Sentence per line."""
    return [Sentence(tuple(line.split()), i) for i, line in enumerate(lines)]


def write_lines(path: Path, lines: Sequence[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def finite_difference_check(model, loss_fn, samples=6, eps=1e-4, seed=0):
    """Compare reverse-mode gradients with central differences on sampled entries."""
    rng = np.random.default_rng(seed)
    model.zero_grad()
    loss_fn().backward()
    worst = 0.0
    for name, param in model.named_parameters():
        flat = param.data.view(-1)
        grad = param.grad.view(-1)
        picks = rng.choice(flat.numel(), size=min(samples, flat.numel()), replace=False)
        analytic, numeric = [], []
        for idx in picks.tolist():
            original = flat[idx].item()
            with torch.no_grad():
                flat[idx] = original + eps
                plus = loss_fn().item()
                flat[idx] = original - eps
                minus = loss_fn().item()
                flat[idx] = original
            analytic.append(grad[idx].item())
            numeric.append((plus - minus) / (2 * eps))
        a, n = np.array(analytic), np.array(numeric)
        scale = max(np.abs(a).max(), np.abs(n).max())
        if scale > 1e-7:
            error = np.abs(a - n).max() / scale
            worst = max(worst, error)
            assert error <= 1e-3, f"{name}: relative error {error:.2e}"
    return worst


@pytest.fixture
def vocab() -> Vocabulary:
    return Vocabulary(["a", "b", "c", "d", "e", "f"])


@pytest.fixture
def small_model(vocab: Vocabulary) -> PolicyModel:
    """A dim-8 model over the shared ten-entry vocabulary."""
    config = ModelConfig(len(vocab), len(vocab), embed_dim=8, hidden_dim=8)
    return init_model(config, seed=7)


@pytest.fixture
def context_model(vocab: Vocabulary) -> PolicyModel:
    config = ModelConfig(len(vocab), len(vocab), embed_dim=8, hidden_dim=8, context_sents=1)
    return init_model(config, seed=7)


@pytest.fixture
def corpus_files(tmp_path: Path) -> Callable[[Sequence[str], Sequence[str]], tuple]:
    """Write a source/target pair under tmp_path and return both paths."""

    def write(src: Sequence[str], tgt: Sequence[str]) -> tuple:
        return write_lines(tmp_path / "c.src", src), write_lines(tmp_path / "c.tgt", tgt)

    return write


@pytest.fixture
def quick_config(tmp_path: Path) -> TrainConfig:
    """Tiny, fast training settings; corpus paths are filled in by the tests."""
    return TrainConfig(
        seed=3,
        epochs=2,
        learning_rate=0.01,
        max_batch_sentences=4,
        beam=2,
        embed_dim=8,
        hidden_dim=8,
        progress=False,
        ckpt_dir=str(tmp_path / "ckpt"),
    )

