"""Command-line front end binding the pipeline into reproducible runs.

Subcommands: ``prepare`` (raw log -> filtered corpus file), ``train``,
``evaluate``, ``robustness`` and ``ablate``. Every run is a pure function of
(config file, seed); the resolved config is echoed into the output
directory. Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import RunConfig, echo_config, load_run_config
from .corpus import (
    apply_k_core,
    build_corpus,
    inject_test_noise,
    load_corpus,
    load_interactions,
    save_corpus,
)
from .encoder import encoder_from_checkpoint, load_checkpoint
from .errors import ConfigError, CoSeRecError
from .evaluator import ablation_suite, evaluate, reports_to_csv, robustness_suite
from .trainer import train

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; usage errors are 1
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coserec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter a raw interaction log into a corpus file")
    p.add_argument("--data", required=True, help="raw interaction file")
    p.add_argument("--out", required=True, help="prepared corpus file to write")
    p.add_argument("--format", default="tsv", choices=("tsv", "seq"))
    p.add_argument("--k-core", type=int, default=5)

    p = sub.add_parser("train", help="train a model from a prepared corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True, help="prepared corpus file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("evaluate", help="rank held-out targets under a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("validation", "test"))
    p.add_argument("--noise", type=float, default=0.0, help="test-noise ratio")
    p.add_argument("--seed", type=int, default=0, help="noise-injection seed")
    p.add_argument("--filter-history", action="store_true")
    p.add_argument("--out", default=None, help="optional metrics.csv path")

    p = sub.add_parser("robustness", help="training-fraction and test-noise grid")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fraction", default=None, help="comma-separated fractions")
    p.add_argument("--noise", default=None, help="comma-separated noise ratios")

    p = sub.add_parser("ablate", help="operator-set ablation grid")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plan", required=True, choices=("leave-one-out", "pairwise", "short-set"))
    p.add_argument("--seed", type=int, default=None)
    return parser


def _parse_float_list(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad float list: {raw!r}") from None


def _prepare_out_dir(cfg: RunConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.echo"), "w", encoding="utf-8") as fh:
        fh.write(echo_config(cfg))


def cmd_prepare(args) -> int:
    log = load_interactions(args.data, args.format)
    filtered = apply_k_core(log, args.k_core)
    corpus = build_corpus(filtered)
    save_corpus(corpus, args.out)
    stats = corpus.stats()
    print(f"users      {stats['users']}")
    print(f"items      {stats['items']}")
    print(f"actions    {stats['actions']}")
    print(f"avg length {stats['avg_length']:.1f}")
    print(f"sparsity   {stats['sparsity']:.2%}")
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, seed=args.seed)
    corpus = load_corpus(args.data)
    _prepare_out_dir(cfg, args.out)
    ckpt_dir = os.path.join(args.out, "checkpoints")
    print(f"training run labeled {cfg.train.label!r} (seed {cfg.train.seed})")
    model, log = train(
        corpus, cfg.train, cfg.aug, cfg.encoder_config(corpus.n_items),
        checkpoint_dir=ckpt_dir,
    )
    log.to_csv(os.path.join(args.out, "train_log.csv"))
    reports = [evaluate(model, corpus, split) for split in ("validation", "test")]
    for rep in reports:
        print(rep.describe())
    reports_to_csv(reports, os.path.join(args.out, "metrics.csv"))
    print(f"best epoch {log.best_epoch}, stopped at {log.stopped_epoch} "
          f"({log.wall_clock_s:.1f}s)")
    return 0


def cmd_evaluate(args) -> int:
    blob = load_checkpoint(args.checkpoint)
    model = encoder_from_checkpoint(blob)
    corpus = load_corpus(args.data)
    condition = {}
    if args.noise:
        corpus = inject_test_noise(corpus, args.noise, args.seed)
        condition["noise_ratio"] = args.noise
    report = evaluate(
        model, corpus, args.split,
        filter_history=args.filter_history, condition=condition,
    )
    print(report.describe())
    if args.out:
        reports_to_csv([report], args.out)
    return 0


def cmd_robustness(args) -> int:
    cfg = load_run_config(args.config, seed=args.seed)
    if args.fraction is not None:
        cfg.fractions = _parse_float_list(args.fraction)
    if args.noise is not None:
        cfg.noise_ratios = _parse_float_list(args.noise)
    cfg.validate()
    corpus = load_corpus(args.data)
    _prepare_out_dir(cfg, args.out)
    reports = robustness_suite(
        corpus, cfg.train, cfg.aug, cfg.encoder_config(corpus.n_items),
        fractions=cfg.fractions, noise_ratios=cfg.noise_ratios,
    )
    for rep in reports:
        print(rep.describe())
    reports_to_csv(reports, os.path.join(args.out, "metrics.csv"))
    return 0


def cmd_ablate(args) -> int:
    cfg = load_run_config(args.config, seed=args.seed)
    corpus = load_corpus(args.data)
    _prepare_out_dir(cfg, args.out)
    reports = ablation_suite(
        corpus, cfg.train, cfg.aug, cfg.encoder_config(corpus.n_items),
        plan=args.plan,
    )
    for rep in reports:
        print(rep.describe())
    reports_to_csv(reports, os.path.join(args.out, "metrics.csv"))
    return 0


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "robustness": cmd_robustness,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stdout)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CoSeRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
