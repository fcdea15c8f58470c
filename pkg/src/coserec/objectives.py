"""Training objectives: next-item loss, contrastive view agreement, and
their weighted joint combination."""

from __future__ import annotations

import torch
import torch.nn.functional as F

SIGMOID_CLAMP = 1e-12


def rec_loss(
    hidden: torch.Tensor,
    targets: torch.Tensor,
    negatives: torch.Tensor,
    item_embeddings: torch.Tensor,
) -> torch.Tensor:
    """Binary log-likelihood next-item loss with one sampled negative per position.

    ``hidden`` is (B, T, d); ``targets``/``negatives`` are (B, T) item IDs with
    0 marking padded (invalid) positions. Per valid position the loss is
    -log sigmoid(h . e_pos) - log(1 - sigmoid(h . e_neg)); positions are
    averaged within each sequence, then across the batch. Sigmoid outputs are
    clamped away from {0, 1} so the logs stay finite.
    """
    valid = targets != 0
    if not valid.any():
        return hidden.new_zeros(())
    pos_e = item_embeddings[targets]
    neg_e = item_embeddings[negatives]
    pos_p = torch.sigmoid((hidden * pos_e).sum(-1)).clamp(SIGMOID_CLAMP, 1 - SIGMOID_CLAMP)
    neg_p = torch.sigmoid((hidden * neg_e).sum(-1)).clamp(SIGMOID_CLAMP, 1 - SIGMOID_CLAMP)
    per_pos = -(torch.log(pos_p) + torch.log(1 - neg_p)) * valid
    counts = valid.sum(dim=1)
    has_any = counts > 0
    per_seq = per_pos.sum(dim=1)[has_any] / counts[has_any]
    return per_seq.mean()


def ntxent(views: torch.Tensor) -> torch.Tensor:
    """Contrastive agreement loss over interleaved view pairs.

    ``views`` holds 2N representation rows ordered so rows (2u-2, 2u-1) are a
    positive pair. Similarity is the plain dot product; each anchor's
    denominator runs over all other 2N-1 rows, and the result is the mean
    over all 2N anchors (both directions of every pair). Stabilized against
    logit overflow via log-sum-exp.
    """
    m = views.shape[0]
    if m < 2 or m % 2 != 0:
        raise ValueError(f"expected an even number (>= 2) of views, got {m}")
    sims = views @ views.T
    sims = sims.masked_fill(torch.eye(m, dtype=torch.bool, device=views.device), float("-inf"))
    partners = torch.arange(m, device=views.device) ^ 1
    return F.cross_entropy(sims, partners)


def joint_loss(rec: torch.Tensor, ssl: torch.Tensor, weight: float) -> torch.Tensor:
    """Weighted sum of the recommendation and contrastive losses."""
    if weight < 0:
        raise ValueError(f"contrastive weight must be >= 0, got {weight}")
    return rec + weight * ssl
