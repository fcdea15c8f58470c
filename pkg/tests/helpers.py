"""Shared fixtures-in-code: tiny corpora, brute-force oracles, RNG helpers.

Oracles here are deliberately naive (double loops, full sorts, term-by-term
enumeration) and independent of the implementation paths they check.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from coserec.corpus import Interaction, SequenceCorpus, build_corpus


def corpus_from_user_items(user_items: dict[str, list[str]]) -> SequenceCorpus:
    """Corpus from {user: ordered item list}; timestamps are positions."""
    log = []
    for user, items in user_items.items():
        for pos, item in enumerate(items, start=1):
            log.append(Interaction(user, item, pos))
    return build_corpus(log)


def random_log(rng: np.random.Generator, n_users: int, n_items: int,
               min_len: int = 3, max_len: int = 10) -> list[Interaction]:
    log = []
    for u in range(n_users):
        length = int(rng.integers(min_len, max_len + 1))
        for t in range(length):
            log.append(Interaction(f"u{u}", f"i{int(rng.integers(n_items))}", t + 1))
    return log


def itemcf_iuf_oracle(corpus: SequenceCorpus, log_base: float = math.e) -> np.ndarray:
    """Dense memory-correlation matrix by a double loop over users.

    Entry [i-1, j-1] is the co-occurrence score of items i and j; diagonal 0.
    """
    view = corpus.train_view()
    n = corpus.n_items
    users_of = [set() for _ in range(n + 1)]
    items_of = {}
    for user, prefix in view:
        items_of[user] = set(prefix)
        for item in set(prefix):
            users_of[item].add(user)
    dense = np.zeros((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            common = users_of[i] & users_of[j]
            if not common:
                continue
            acc = 0.0
            for u in common:
                acc += 1.0 / (math.log(1 + len(items_of[u])) / math.log(log_base))
            dense[i - 1, j - 1] = acc / math.sqrt(len(users_of[i]) * len(users_of[j]))
    return dense


def dense_top1(dense: np.ndarray) -> dict[int, tuple[int, float]]:
    """Row argmax with lowest-ID tie-break over a dense score matrix."""
    n = dense.shape[0]
    out = {}
    for i in range(n):
        row = dense[i].copy()
        row[i] = -np.inf
        j = int(np.argmax(row))
        out[i + 1] = (j + 1, float(row[j]))
    return out


def minmax_normalize_offdiag(dense: np.ndarray) -> np.ndarray:
    off = ~np.eye(dense.shape[0], dtype=bool)
    vals = dense[off]
    lo, hi = vals.min(), vals.max()
    if hi > lo:
        out = (dense - lo) / (hi - lo)
    else:
        out = np.zeros_like(dense)
    out[~off] = 0.0
    return out


def ntxent_oracle(views: np.ndarray) -> float:
    """Term-by-term contrastive loss enumeration with explicit stabilization."""
    sims = views @ views.T
    m = len(sims)
    total = 0.0
    for a in range(m):
        p = a ^ 1
        others = [j for j in range(m) if j != a]
        mx = max(sims[a][j] for j in others)
        denom = sum(math.exp(sims[a][j] - mx) for j in others)
        total += -(sims[a][p] - mx - math.log(denom))
    return total / m


def rank_oracle(scores: np.ndarray, target: int) -> int:
    """Rank by full sort; among equal scores the target sorts last."""
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j == target - 1))
    return order.index(target - 1) + 1


def fd_gradients(loss_fn, model, h: float = 1e-5) -> dict[str, torch.Tensor]:
    """Central finite differences of a scalar loss for every parameter entry."""
    out = {}
    for name, p in model.named_parameters():
        flat = p.data.view(-1)
        grad = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            with torch.no_grad():
                up = loss_fn().item()
            flat[i] = orig - h
            with torch.no_grad():
                down = loss_fn().item()
            flat[i] = orig
            grad[i] = (up - down) / (2 * h)
        out[name] = grad.view_as(p)
    return out
