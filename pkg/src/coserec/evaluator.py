"""Full-ranking next-item evaluation and the robustness/ablation drivers.

Every metric is rank-based: the held-out target is ranked against the whole
item set (no negative sampling), with ties counted against the target.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .augment import AugmentParams, LONG_OPS_DEFAULT, SHORT_OPS_DEFAULT
from .corpus import SequenceCorpus, inject_test_noise, subsample_training
from .encoder import EncoderConfig, SequenceEncoder, pad_sequences
from .errors import EmptyDataError

logger = logging.getLogger(__name__)

DEFAULT_KS = (5, 10, 20)


@dataclass
class MetricReport:
    """Mean per-user ranking metrics for one split under one condition."""

    split: str
    n_users: int
    metrics: dict[str, float]
    condition: dict[str, object] = field(default_factory=dict)

    def get(self, name: str) -> float:
        return self.metrics[name]

    def describe(self) -> str:
        cond = ",".join(f"{k}={v}" for k, v in sorted(self.condition.items()))
        vals = "  ".join(f"{k}={v:.4f}" for k, v in sorted(self.metrics.items()))
        head = f"[{self.split}] users={self.n_users}"
        if cond:
            head += f" ({cond})"
        return f"{head}  {vals}"


def rank_from_scores(scores: np.ndarray, target: int) -> int:
    """1-based rank of the target item in a |V|-vector of scores.

    ``scores[j]`` scores item j + 1. Ties break against the target: the rank
    counts every other item scoring >= the target's score.
    """
    if not 1 <= target <= len(scores):
        raise ValueError(f"target {target} outside 1..{len(scores)}")
    s_t = scores[target - 1]
    greater = int((scores > s_t).sum())
    equal = int((scores == s_t).sum()) - 1
    return 1 + greater + equal


def hr_at_k(rank: int, k: int) -> float:
    _check_rank_k(rank, k)
    return 1.0 if rank <= k else 0.0


def ndcg_at_k(rank: int, k: int) -> float:
    _check_rank_k(rank, k)
    return 1.0 / math.log2(rank + 1) if rank <= k else 0.0


def _check_rank_k(rank: int, k: int) -> None:
    if rank < 1 or k < 1:
        raise ValueError(f"rank and k must be >= 1, got rank={rank}, k={k}")


def rank_target(model: SequenceEncoder, input_seq, target: int) -> int:
    """Rank of the target under the model's final-position scores."""
    ids = pad_sequences([input_seq], model.config.max_len)
    with torch.no_grad():
        hidden = model.encode(ids, train_mode=False)
        scores = model.score_items(hidden[0, -1])
    return rank_from_scores(scores.cpu().numpy(), target)


def evaluate(
    model: SequenceEncoder,
    corpus: SequenceCorpus,
    split: str,
    ks: tuple[int, ...] = DEFAULT_KS,
    batch_size: int = 256,
    filter_history: bool = False,
    condition: dict | None = None,
) -> MetricReport:
    """Mean HR@k / NDCG@k over all users of a split, ranking the whole item set.

    ``filter_history`` optionally masks items from the user's history
    (never the target itself) out of the candidate set.
    """
    instances = corpus.eval_instances(split)
    if not instances:
        raise EmptyDataError(f"split {split!r} is empty")
    ranks = np.empty(len(instances), dtype=np.int64)
    with torch.no_grad():
        for lo in range(0, len(instances), batch_size):
            chunk = instances[lo : lo + batch_size]
            ids = pad_sequences([inst.inputs for inst in chunk], model.config.max_len)
            hidden = model.encode(ids, train_mode=False)
            scores = model.score_items(hidden[:, -1]).cpu().numpy()
            for row, inst in enumerate(chunk):
                s = scores[row]
                if filter_history:
                    s = s.copy()
                    drop = [i - 1 for i in corpus.user_items(inst.user) if i != inst.target]
                    s[drop] = -np.inf
                ranks[lo + row] = rank_from_scores(s, inst.target)
    metrics: dict[str, float] = {}
    for k in ks:
        metrics[f"hr@{k}"] = float(np.mean([hr_at_k(int(r), k) for r in ranks]))
        metrics[f"ndcg@{k}"] = float(np.mean([ndcg_at_k(int(r), k) for r in ranks]))
    return MetricReport(split, len(instances), metrics, dict(condition or {}))


def robustness_suite(
    corpus: SequenceCorpus,
    train_config,
    aug: AugmentParams | None = None,
    enc: EncoderConfig | None = None,
    fractions: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0),
    noise_ratios: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5),
    perturbation_seed: int = 0,
) -> list[MetricReport]:
    """Test-set reports across training-fraction and test-noise conditions.

    Each fraction trains a model on that subsample and evaluates on the
    clean test split. Noise conditions share one model trained on the full
    data and evaluate on noise-injected test inputs.
    """
    from .trainer import train

    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"training fraction must be in (0, 1], got {f}")
    for r in noise_ratios:
        if not 0.0 <= r <= 0.5:
            raise ValueError(f"noise ratio must be in [0, 0.5], got {r}")

    reports: list[MetricReport] = []
    full_model = None
    for f in fractions:
        sub = subsample_training(corpus, f, perturbation_seed)
        model, _ = train(sub, train_config, aug, enc)
        if f == 1.0:
            full_model = model
        reports.append(evaluate(
            model, sub, "test",
            condition={"train_fraction": f, "noise_ratio": 0.0},
        ))
    if noise_ratios:
        if full_model is None:
            full_model, _ = train(corpus, train_config, aug, enc)
        for r in noise_ratios:
            noisy = inject_test_noise(corpus, r, perturbation_seed)
            reports.append(evaluate(
                full_model, noisy, "test",
                condition={"train_fraction": 1.0, "noise_ratio": r},
            ))
    return reports


_FULL_SET = LONG_OPS_DEFAULT


def ablation_plan(plan: str) -> list[dict]:
    """Operator configurations for a named ablation plan.

    Each entry carries the AugmentParams field overrides plus a label.
    """
    if plan == "leave-one-out":
        entries = [{"label": "full", "long_ops": _FULL_SET, "short_ops": SHORT_OPS_DEFAULT}]
        for op in _FULL_SET:
            remaining = tuple(o for o in _FULL_SET if o != op)
            short = tuple(o for o in SHORT_OPS_DEFAULT if o != op)
            entries.append({
                "label": f"w/o {op}",
                "long_ops": remaining,
                "short_ops": short or remaining,
            })
        return entries
    if plan == "pairwise":
        entries = []
        for i, a in enumerate(_FULL_SET):
            for b in _FULL_SET[i:]:
                entries.append({"label": f"({a},{b})", "fixed_pair": (a, b)})
        return entries
    if plan == "short-set":
        candidates = [
            ("S", "I"),
            ("S", "M"),
            ("I", "M"),
            ("S", "I", "M"),
            ("S", "I", "M", "R", "C"),
        ]
        return [
            {"label": "short:" + "".join(ops), "short_ops": ops}
            for ops in candidates
        ]
    raise ValueError(f"unknown ablation plan {plan!r}")


def ablation_suite(
    corpus: SequenceCorpus,
    train_config,
    aug: AugmentParams | None = None,
    enc: EncoderConfig | None = None,
    plan: str = "leave-one-out",
) -> list[MetricReport]:
    """One trained model and test report per operator configuration."""
    from .trainer import train

    base = aug if aug is not None else AugmentParams()
    reports = []
    for entry in ablation_plan(plan):
        overrides = {k: v for k, v in entry.items() if k != "label"}
        variant = dataclasses.replace(base, **overrides)
        variant.validate()
        model, _ = train(corpus, train_config, variant, enc)
        reports.append(evaluate(
            model, corpus, "test",
            condition={"plan": plan, "ops": entry["label"]},
        ))
    return reports


def reports_to_csv(reports: list[MetricReport], path: str) -> None:
    """Write reports as ``condition,metric,k,value`` rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("condition,metric,k,value\n")
        for rep in reports:
            cond = ";".join(f"{k}={v}" for k, v in sorted(rep.condition.items()))
            cond = cond or f"split={rep.split}"
            for name in sorted(rep.metrics):
                metric, k = name.split("@")
                fh.write(f"{cond},{metric},{k},{rep.metrics[name]!r}\n")
