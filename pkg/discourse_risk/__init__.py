"""
discourse-risk: document-level NMT fine-tuning with discourse rewards

Trains a small attentional encoder-decoder with NLL, then fine-tunes it with an
expected-risk objective whose rewards are document BLEU, lexical cohesion (LC)
and coherence (COH) computed over whole candidate documents.

Usage:
    from discourse_risk import build_config, gen_synthetic, pretrain_nll, finetune_risk

    paths = gen_synthetic("cohesion", "data/", docs=60)
    config = build_config(overrides={
        "train_src": paths["train_src"], "train_tgt": paths["train_tgt"],
        "relations": paths["relations"], "topics": paths["topics"],
    })
    init = pretrain_nll(config)
    best = finetune_risk(config.replace(rewards="lc_doc"), init)
"""

__version__ = "0.1.0a1"

from .bleu import BleuScore, bleu_corpus, bleu_document, bleu_sentence  # noqa: E402
from .coherence import TopicTable, coherence, load_topic_table  # noqa: E402
from .config import TrainConfig, build_config, load_config_file  # noqa: E402
from .corpus import (  # noqa: E402
    ParallelDocument,
    Sentence,
    Vocabulary,
    build_vocab,
    load_corpus,
    make_segments,
    tokenize,
)
from .errors import DiscourseRiskError  # noqa: E402
from .lexcohesion import RelationDb, lexical_cohesion, load_relation_db  # noqa: E402
from .policy import (  # noqa: E402
    ModelConfig,
    beam_search,
    greedy_decode,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .reporting import reward_curves, score  # noqa: E402
from .risk import (  # noqa: E402
    MixSchedule,
    RewardSpec,
    candidate_probabilities,
    next_objective,
    risk_loss,
    segment_reward,
)
from .synthetic import gen_synthetic  # noqa: E402
from .trainer import finetune_risk, pretrain_nll, translate  # noqa: E402


def version() -> str:
    """Return the package version."""
    return __version__


__all__ = [
    "__version__",
    "version",
    "BleuScore",
    "DiscourseRiskError",
    "MixSchedule",
    "ModelConfig",
    "ParallelDocument",
    "RelationDb",
    "RewardSpec",
    "Sentence",
    "TopicTable",
    "TrainConfig",
    "Vocabulary",
    "beam_search",
    "bleu_corpus",
    "bleu_document",
    "bleu_sentence",
    "build_config",
    "build_vocab",
    "candidate_probabilities",
    "coherence",
    "finetune_risk",
    "gen_synthetic",
    "greedy_decode",
    "init_model",
    "lexical_cohesion",
    "load_checkpoint",
    "load_config_file",
    "load_corpus",
    "load_relation_db",
    "load_topic_table",
    "make_segments",
    "next_objective",
    "pretrain_nll",
    "reward_curves",
    "risk_loss",
    "save_checkpoint",
    "score",
    "segment_reward",
    "tokenize",
    "translate",
]
