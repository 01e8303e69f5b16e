"""
Command-line interface.

Usage:
    discourse-risk gen-synthetic --kind cohesion --out data/ --docs 60
    discourse-risk pretrain --train-src data/train.src --train-tgt data/train.tgt --ckpt-dir ckpt/
    discourse-risk finetune-risk --init ckpt/pretrain-000020.json --rewards lc_doc ...
    discourse-risk translate --checkpoint ckpt/finetune-000040.json --src test.src --out test.hyp
    discourse-risk score --hyp test.hyp --ref data/test.tgt --relations data/relations.tsv
    discourse-risk reward-curves --log ckpt/finetune-log.jsonl --out curves.csv
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from . import __version__
from .config import TrainConfig, build_config
from .errors import DiscourseRiskError
from .reporting import reward_curves, score
from .synthetic import KINDS, gen_synthetic
from .trainer import finetune_risk, load_resources, pretrain_nll, translate

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# flag dest -> TrainConfig field
_TRAIN_FLAGS = {
    "seed": "seed",
    "epochs": "epochs",
    "lr": "learning_rate",
    "batch_sents": "max_batch_sentences",
    "beam": "beam",
    "risk_prob": "risk_prob",
    "rewards": "rewards",
    "context_sents": "context_sents",
    "anneal_steps": "annealing_steps",
    "relations": "relations",
    "topics": "topics",
    "stoplist": "stoplist",
    "ckpt_dir": "ckpt_dir",
    "train_src": "train_src",
    "train_tgt": "train_tgt",
    "valid_src": "valid_src",
    "valid_tgt": "valid_tgt",
    "progress": "progress",
}


def _add_resource_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--relations", help="relation database (word<TAB>label<TAB>word)")
    parser.add_argument("--topics", help="topic table (word2vec text format)")
    parser.add_argument("--stoplist", help="stopword list, one word per line")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--train-src")
    parser.add_argument("--train-tgt")
    parser.add_argument("--valid-src")
    parser.add_argument("--valid-tgt")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float, help="initial learning rate")
    parser.add_argument("--batch-sents", type=int, help="sentences per batch")
    parser.add_argument("--beam", type=int, help="candidates per sentence for Risk")
    parser.add_argument("--risk-prob", type=float, help="probability of a Risk batch")
    parser.add_argument("--rewards", help="e.g. bleu_doc+lc_doc+coh_doc")
    parser.add_argument("--context-sents", type=int, choices=(0, 1))
    parser.add_argument("--anneal-steps", type=int, help="learning-rate halvings before stopping")
    parser.add_argument("--ckpt-dir")
    parser.add_argument(
        "--no-progress", dest="progress", action="store_false", default=None,
        help="disable progress bars",
    )
    _add_resource_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discourse-risk",
        description="Document-level NMT fine-tuning with discourse rewards",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="INFO",
        type=str.upper,
        choices=LOG_LEVELS,
        help="root log level (default INFO)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train a policy with NLL")
    _add_train_flags(p)

    p = sub.add_parser("finetune-risk", help="fine-tune a policy with mixed Risk/NLL")
    _add_train_flags(p)
    p.add_argument("--init", required=True, help="pretrained checkpoint")

    p = sub.add_parser("translate", help="translate a source corpus file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=1)

    p = sub.add_parser("score", help="BLEU_doc, LC and COH of a translation")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", help="TSV report (default: stdout)")
    _add_resource_flags(p)

    p = sub.add_parser("gen-synthetic", help="write a synthetic corpus")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--docs", type=int, default=40)
    p.add_argument("--sents-per-doc", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("reward-curves", help="training log to CSV")
    p.add_argument("--log", required=True, help="<stage>-log.jsonl")
    p.add_argument("--out", required=True)
    return parser


def config_from_args(args: argparse.Namespace) -> TrainConfig:
    overrides: Dict[str, Any] = {
        field: getattr(args, flag) for flag, field in _TRAIN_FLAGS.items() if hasattr(args, flag)
    }
    return build_config(args.config, overrides)


def _run(args: argparse.Namespace) -> None:
    if args.command == "pretrain":
        path = pretrain_nll(config_from_args(args))
        print(f"✓ pretrained checkpoint: {path}")
    elif args.command == "finetune-risk":
        path = finetune_risk(config_from_args(args), args.init)
        print(f"✓ fine-tuned checkpoint: {path}")
    elif args.command == "translate":
        path = translate(args.checkpoint, args.src, args.out, args.beam)
        print(f"✓ translation written to {path}")
    elif args.command == "score":
        resources = load_resources(args.relations, args.topics, args.stoplist)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as handle:
                report = score(args.hyp, args.ref, resources, handle)
            print(report.summary())
        else:
            report = score(args.hyp, args.ref, resources, sys.stdout)
            print(report.summary(), file=sys.stderr)
    elif args.command == "gen-synthetic":
        paths = gen_synthetic(args.kind, args.out, args.docs, args.sents_per_doc, args.seed)
        print(f"✓ wrote {len(paths)} files to {args.out}")
    elif args.command == "reward-curves":
        rows = reward_curves(args.log, args.out)
        print(f"✓ {len(rows)} validation rows written to {args.out}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = "DEBUG" if args.verbose else args.log_level
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        _run(args)
    except (DiscourseRiskError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"✗ {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
