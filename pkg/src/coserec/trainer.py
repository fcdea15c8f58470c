"""Joint-objective training loop: per-epoch correlation selection, two-view
augmentation, three encoder passes per batch, Adam updates and early
stopping, plus the alternative pretrain-then-finetune schedule."""

from __future__ import annotations

import copy
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import torch

from . import objectives
from .augment import AugmentParams, augment_pair
from .corpus import SequenceCorpus
from .correlation import CorrelationTable, correlation_for_epoch, memory_correlation
from .encoder import EncoderConfig, SequenceEncoder, pad_sequences, save_checkpoint
from .errors import NumericError

logger = logging.getLogger(__name__)

# Stream tags keeping the master seed's RNG fan-out disjoint.
_STREAM_SHUFFLE = 1
_STREAM_AUGMENT = 2
_STREAM_NEGATIVES = 3


@dataclass
class TrainConfig:
    ssl_weight: float = 0.1
    switch_epoch: int = 160
    max_epochs: int = 200
    batch_size: int = 256
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 40
    seed: int = 42
    mode: str = "multi-task"
    pretrain_epochs: int = 50
    early_stop_metric: str = "ndcg@20"

    def validate(self) -> None:
        if self.ssl_weight < 0:
            raise ValueError(f"ssl_weight must be >= 0, got {self.ssl_weight}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.switch_epoch < 0:
            raise ValueError("switch_epoch must be >= 0")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.mode not in ("multi-task", "two-stage"):
            raise ValueError(f"mode must be 'multi-task' or 'two-stage', got {self.mode!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")

    @property
    def label(self) -> str:
        return "sasrec-equivalent" if self.ssl_weight == 0 else "coserec"


@dataclass
class EpochRecord:
    epoch: int
    stage: str
    rec_loss: float
    ssl_loss: float
    joint_loss: float
    val_metrics: dict[str, float]
    is_best: bool


@dataclass
class TrainLog:
    label: str
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    wall_clock_s: float = 0.0  # informational; kept out of the CSV

    CSV_METRICS = ("hr@5", "hr@10", "hr@20", "ndcg@5", "ndcg@10", "ndcg@20")

    def to_csv(self, path: str) -> None:
        """Deterministic CSV: a pure function of the recorded values."""
        cols = ["epoch", "stage", "rec_loss", "ssl_loss", "joint_loss"]
        cols += [f"val_{m}" for m in self.CSV_METRICS]
        cols += ["is_best"]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.records:
                row = [str(r.epoch), r.stage, repr(r.rec_loss), repr(r.ssl_loss),
                       repr(r.joint_loss)]
                row += [repr(r.val_metrics.get(m, float("nan"))) for m in self.CSV_METRICS]
                row += ["1" if r.is_best else "0"]
                fh.write(",".join(row) + "\n")


class Adam:
    """Bias-corrected Adam over named parameter tensors."""

    def __init__(
        self,
        params: Iterable[tuple[str, torch.Tensor]],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {n: torch.zeros_like(p) for n, p in self.params.items()}
        self.v = {n: torch.zeros_like(p) for n, p in self.params.items()}
        self.step_count = 0

    @torch.no_grad()
    def step(self, grads: dict[str, torch.Tensor] | None = None) -> None:
        self.step_count += 1
        bc1 = 1 - self.beta1 ** self.step_count
        bc2 = 1 - self.beta2 ** self.step_count
        for name, p in self.params.items():
            if grads is not None:
                g = grads[name]
            elif p.grad is not None:
                g = p.grad
            else:
                continue
            if not torch.isfinite(g).all():
                raise NumericError(f"non-finite gradient for parameter {name}")
            m, v = self.m[name], self.v[name]
            m.mul_(self.beta1).add_(g, alpha=1 - self.beta1)
            v.mul_(self.beta2).addcmul_(g, g, value=1 - self.beta2)
            p.addcdiv_(m / bc1, (v / bc2).sqrt_().add_(self.eps), value=-self.lr)

    def state_dict(self) -> dict:
        return {
            "m": {n: t.clone() for n, t in self.m.items()},
            "v": {n: t.clone() for n, t in self.v.items()},
            "step_count": self.step_count,
        }

    def load_state_dict(self, state: dict) -> None:
        for n in self.m:
            self.m[n].copy_(state["m"][n])
            self.v[n].copy_(state["v"][n])
        self.step_count = state["step_count"]


def _rec_tensors(corpus: SequenceCorpus, max_len: int):
    """Constant per-user (inputs, targets) rows for the next-item objective.

    A training prefix [v1..vm] yields input [v1..v_{m-1}] and per-position
    targets [v2..vm]; rows longer than ``max_len`` keep the most recent
    transitions."""
    users, inputs, targets = [], [], []
    for user, prefix in corpus.train_view():
        if len(prefix) < 2:
            continue
        users.append(user)
        inputs.append(prefix[:-1][-max_len:])
        targets.append(prefix[1:][-max_len:])
    return users, pad_sequences(inputs, max_len), pad_sequences(targets, max_len)


def _sample_negatives(
    corpus: SequenceCorpus,
    users: list[int],
    targets: torch.Tensor,
    epoch: int,
    seed: int,
) -> torch.Tensor:
    """Per-position negatives outside each user's full history.

    Drawn from one per-epoch stream in canonical user order, so the result
    does not depend on batch shuffling."""
    rng = np.random.default_rng((seed, _STREAM_NEGATIVES, epoch))
    n_items = corpus.n_items
    negs = torch.zeros_like(targets)
    order = np.argsort(users)
    for row in order:
        user = users[row]
        seen = corpus.user_items(user)
        count = int((targets[row] != 0).sum())
        exhausted = len(seen) >= n_items
        if exhausted:
            logger.warning("user %d interacted with every item; negatives overlap history", user)
        picks = []
        while len(picks) < count:
            cand = int(rng.integers(1, n_items + 1))
            if exhausted or cand not in seen:
                picks.append(cand)
        negs[row, -count:] = torch.tensor(picks, dtype=torch.long)
    return negs


def _needs_correlation(aug: AugmentParams) -> bool:
    ops = set(aug.short_ops) | set(aug.long_ops)
    if aug.fixed_pair is not None:
        ops = set(aug.fixed_pair)
    return bool(ops & {"S", "I"})


def _batch_views(
    corpus: SequenceCorpus,
    batch_users: list[int],
    prefixes: dict[int, tuple[int, ...]],
    aug: AugmentParams,
    corr: CorrelationTable | None,
    epoch: int,
    seed: int,
    max_len: int,
) -> torch.Tensor:
    """Two augmented views per user, interleaved so rows (2u, 2u+1) pair up."""
    mask_token = corpus.vocabulary.mask_id
    views: list[tuple[int, ...]] = []
    for user in batch_users:
        rng = np.random.default_rng((seed, _STREAM_AUGMENT, epoch, user))
        pair = augment_pair(prefixes[user], aug, corr, mask_token, rng, max_len)
        views.append(pair.view1)
        views.append(pair.view2)
    return pad_sequences(views, max_len)


@dataclass
class _EpochLosses:
    rec: float = 0.0
    ssl: float = 0.0
    joint: float = 0.0
    weight: int = 0

    def add(self, rec: float, ssl: float, joint: float, n: int) -> None:
        self.rec += rec * n
        self.ssl += ssl * n
        self.joint += joint * n
        self.weight += n

    def means(self) -> tuple[float, float, float]:
        w = max(self.weight, 1)
        return self.rec / w, self.ssl / w, self.joint / w


def train(
    corpus: SequenceCorpus,
    config: TrainConfig,
    aug: AugmentParams | None = None,
    enc: EncoderConfig | None = None,
    checkpoint_dir: str | None = None,
) -> tuple[SequenceEncoder, TrainLog]:
    """Run the multi-task (or, per config.mode, two-stage) schedule and
    return the encoder restored to its best-validation state."""
    config.validate()
    if config.mode == "two-stage":
        return train_two_stage(corpus, config, aug, enc, checkpoint_dir)
    aug = aug if aug is not None else AugmentParams()
    aug.validate()
    enc = enc if enc is not None else EncoderConfig(item_count=corpus.n_items)
    enc.validate()

    torch.manual_seed(config.seed)
    model = SequenceEncoder(enc)
    adam = Adam(
        model.named_parameters(),
        lr=config.lr, beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps,
    )
    log = TrainLog(label=config.label)
    _fit_loop(
        model, adam, corpus, config, aug, enc, log,
        use_rec=True,
        ssl_weight=config.ssl_weight,
        start_epoch=1,
        max_epochs=config.max_epochs,
        early_stop=True,
        stage="train",
        checkpoint_dir=checkpoint_dir,
    )
    return model, log


def train_two_stage(
    corpus: SequenceCorpus,
    config: TrainConfig,
    aug: AugmentParams | None = None,
    enc: EncoderConfig | None = None,
    checkpoint_dir: str | None = None,
) -> tuple[SequenceEncoder, TrainLog]:
    """Contrastive-only pretraining for a fixed epoch budget, then next-item
    fine-tuning under early stopping."""
    config.validate()
    aug = aug if aug is not None else AugmentParams()
    aug.validate()
    enc = enc if enc is not None else EncoderConfig(item_count=corpus.n_items)
    enc.validate()

    torch.manual_seed(config.seed)
    model = SequenceEncoder(enc)
    log = TrainLog(label="two-stage")
    if config.pretrain_epochs > 0:
        adam1 = Adam(
            model.named_parameters(),
            lr=config.lr, beta1=config.adam_beta1, beta2=config.adam_beta2,
            eps=config.adam_eps,
        )
        _fit_loop(
            model, adam1, corpus, config, aug, enc, log,
            use_rec=False,
            ssl_weight=1.0,
            start_epoch=1,
            max_epochs=config.pretrain_epochs,
            early_stop=False,
            stage="pretrain",
            checkpoint_dir=checkpoint_dir,
        )
        if checkpoint_dir:
            path = os.path.join(checkpoint_dir, "stage1.ckpt")
            save_checkpoint(path, model, epoch=config.pretrain_epochs)
            from .encoder import encoder_from_checkpoint, load_checkpoint
            model = encoder_from_checkpoint(load_checkpoint(path))
    adam2 = Adam(
        model.named_parameters(),
        lr=config.lr, beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps,
    )
    _fit_loop(
        model, adam2, corpus, config, aug, enc, log,
        use_rec=True,
        ssl_weight=0.0,
        start_epoch=config.pretrain_epochs + 1,
        max_epochs=config.pretrain_epochs + config.max_epochs,
        early_stop=True,
        stage="finetune",
        checkpoint_dir=checkpoint_dir,
    )
    return model, log


def _fit_loop(
    model: SequenceEncoder,
    adam: Adam,
    corpus: SequenceCorpus,
    config: TrainConfig,
    aug: AugmentParams,
    enc: EncoderConfig,
    log: TrainLog,
    *,
    use_rec: bool,
    ssl_weight: float,
    start_epoch: int,
    max_epochs: int,
    early_stop: bool,
    stage: str,
    checkpoint_dir: str | None,
) -> None:
    from .evaluator import evaluate

    started = time.monotonic()
    use_ssl = ssl_weight > 0
    users, inputs_all, targets_all = _rec_tensors(corpus, enc.max_len)
    if not users:
        raise ValueError("training view yields no usable sequences")
    row_of = {u: i for i, u in enumerate(users)}
    prefixes = {u: p for u, p in corpus.train_view()}

    mem_table = memory_correlation(corpus) if (use_ssl and _needs_correlation(aug)) else None

    def embeddings_snapshot() -> np.ndarray:
        return model.item_emb.weight.detach().cpu().double().numpy().copy()

    best_metric = -math.inf
    best_state: dict | None = None
    since_best = 0

    for epoch in range(start_epoch, max_epochs + 1):
        corr = None
        if mem_table is not None:
            corr = correlation_for_epoch(
                epoch, config.switch_epoch, mem_table, embeddings_snapshot
            )
        shuffle_rng = np.random.default_rng((config.seed, _STREAM_SHUFFLE, epoch))
        order = [users[i] for i in shuffle_rng.permutation(len(users))]
        negatives = (
            _sample_negatives(corpus, users, targets_all, epoch, config.seed)
            if use_rec else None
        )

        losses = _EpochLosses()
        for lo in range(0, len(order), config.batch_size):
            batch_users = order[lo : lo + config.batch_size]
            if not batch_users:
                logger.warning("skipping empty batch at epoch %d", epoch)
                continue
            rows = torch.tensor([row_of[u] for u in batch_users], dtype=torch.long)
            l_rec = torch.zeros((), dtype=enc.torch_dtype)
            if use_rec:
                hidden = model.encode(inputs_all[rows], train_mode=True)
                l_rec = objectives.rec_loss(
                    hidden, targets_all[rows], negatives[rows], model.item_emb.weight
                )
            l_ssl = torch.zeros((), dtype=enc.torch_dtype)
            if use_ssl:
                view_ids = _batch_views(
                    corpus, batch_users, prefixes, aug, corr,
                    epoch, config.seed, enc.max_len,
                )
                view_hidden = model.encode(view_ids, train_mode=True)
                reps = model.sequence_representation(view_hidden, view_ids)
                l_ssl = objectives.ntxent(reps)
            loss = objectives.joint_loss(l_rec, l_ssl, ssl_weight) if use_rec else l_ssl
            if not torch.isfinite(loss):
                if checkpoint_dir:
                    os.makedirs(checkpoint_dir, exist_ok=True)
                    save_checkpoint(
                        os.path.join(checkpoint_dir, "diagnostic.ckpt"), model,
                        optimizer_state=adam.state_dict(), epoch=epoch,
                    )
                raise NumericError(f"non-finite loss at epoch {epoch}")
            model.zero_grad(set_to_none=True)
            loss.backward()
            adam.step()
            losses.add(
                l_rec.detach().item(), l_ssl.detach().item(), loss.detach().item(),
                len(batch_users),
            )

        rec_mean, ssl_mean, joint_mean = losses.means()
        report = evaluate(model, corpus, "validation")
        metric = report.get(config.early_stop_metric)
        improved = metric > best_metric
        if improved:
            best_metric = metric
            best_state = copy.deepcopy(model.state_dict())
            log.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
        log.records.append(EpochRecord(
            epoch=epoch,
            stage=stage,
            rec_loss=rec_mean if use_rec else float("nan"),
            ssl_loss=ssl_mean if use_ssl else float("nan"),
            joint_loss=joint_mean,
            val_metrics=dict(report.metrics),
            is_best=improved and early_stop,
        ))
        logger.info(
            "[%s] epoch %d rec=%.4f ssl=%.4f joint=%.4f val_%s=%.4f%s",
            log.label, epoch, rec_mean, ssl_mean, joint_mean,
            config.early_stop_metric, metric, " *" if improved else "",
        )
        log.stopped_epoch = epoch
        if early_stop and since_best >= config.patience:
            logger.info("early stop at epoch %d (best %d)", epoch, log.best_epoch)
            break

    if early_stop and best_state is not None:
        model.load_state_dict(best_state)
    log.wall_clock_s += time.monotonic() - started
    if checkpoint_dir:
        os.makedirs(checkpoint_dir, exist_ok=True)
        save_checkpoint(
            os.path.join(checkpoint_dir, "best.ckpt"), model,
            optimizer_state=adam.state_dict(), epoch=log.best_epoch,
        )
