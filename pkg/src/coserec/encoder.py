"""Left-to-right self-attention sequence encoder with tied item scoring.

Inputs are left-padded item-ID rows; each block applies causal multi-head
self-attention and a position-wise feed-forward network, both in the
post-norm arrangement (residual add, then layer norm). Item scores are dot
products against the shared input embedding table. Checkpoints are versioned
binary blobs with a leading magic string.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .errors import NumericError, ParseError

CHECKPOINT_MAGIC = b"COSEREC-CKPT-v1\n"

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class EncoderConfig:
    """Architecture hyperparameters; ``item_count`` excludes the two
    reserved rows (padding 0, mask item_count + 1)."""

    item_count: int
    embedding_dim: int = 64
    blocks: int = 2
    heads: int = 2
    max_len: int = 50
    dropout: float = 0.2
    zero_pad_in_repr: bool = False
    precision: str = "float32"

    @property
    def vocab_size(self) -> int:
        return self.item_count + 2

    @property
    def torch_dtype(self) -> torch.dtype:
        return _DTYPES[self.precision]

    def validate(self) -> None:
        if self.item_count < 1:
            raise ValueError("item_count must be >= 1")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.embedding_dim < 1 or self.embedding_dim % self.heads != 0:
            raise ValueError(
                f"embedding_dim {self.embedding_dim} must be positive and divisible "
                f"by heads {self.heads}"
            )
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.precision not in _DTYPES:
            raise ValueError(f"precision must be one of {sorted(_DTYPES)}")


def pad_sequences(seqs: Sequence[Sequence[int]], max_len: int) -> torch.Tensor:
    """Left-pad (or left-truncate to the most recent items) to (B, max_len)."""
    out = torch.zeros((len(seqs), max_len), dtype=torch.long)
    for row, seq in enumerate(seqs):
        tail = list(seq)[-max_len:]
        if tail:
            out[row, max_len - len(tail):] = torch.tensor(tail, dtype=torch.long)
    return out


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.ffn1 = nn.Linear(dim, dim)
        self.ffn2 = nn.Linear(dim, dim)
        self.attn_norm = nn.LayerNorm(dim, eps=1e-8)
        self.ffn_norm = nn.LayerNorm(dim, eps=1e-8)
        self.dropout = dropout

    def forward(self, x: torch.Tensor, allowed: torch.Tensor, train_mode: bool) -> torch.Tensor:
        b, t, d = x.shape
        h, hd = self.heads, self.head_dim

        def split(z):
            return z.view(b, t, h, hd).transpose(1, 2)  # (B, h, T, hd)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(hd)
        scores = scores.masked_fill(~allowed, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        attn = F.dropout(attn, self.dropout, training=train_mode)
        ctx = (attn @ v).transpose(1, 2).reshape(b, t, d)
        ctx = F.dropout(self.out_proj(ctx), self.dropout, training=train_mode)
        x = self.attn_norm(x + ctx)

        f = self.ffn1(x).relu()
        f = F.dropout(f, self.dropout, training=train_mode)
        f = F.dropout(self.ffn2(f), self.dropout, training=train_mode)
        return self.ffn_norm(x + f)


class SequenceEncoder(nn.Module):
    """Stack of causal self-attention blocks over item + position embeddings."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        d = config.embedding_dim
        self.item_emb = nn.Embedding(config.vocab_size, d, padding_idx=0)
        self.pos_emb = nn.Embedding(config.max_len, d)
        self.blocks = nn.ModuleList(
            EncoderBlock(d, config.heads, config.dropout) for _ in range(config.blocks)
        )
        self._init_weights()
        self.to(config.torch_dtype)

    def _init_weights(self) -> None:
        for module in self.modules():
            if isinstance(module, (nn.Linear, nn.Embedding)):
                nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)
        with torch.no_grad():
            self.item_emb.weight[0].zero_()

    def _attention_mask(self, seqs: torch.Tensor) -> torch.Tensor:
        # Allowed: non-future content positions; self-attention always allowed
        # so all-masked softmax rows cannot arise on padding queries.
        t = seqs.shape[1]
        causal = torch.tril(torch.ones(t, t, dtype=torch.bool, device=seqs.device))
        content = (seqs != 0).unsqueeze(1)  # (B, 1, T) keys
        allowed = causal.unsqueeze(0) & content
        allowed = allowed | torch.eye(t, dtype=torch.bool, device=seqs.device).unsqueeze(0)
        return allowed.unsqueeze(1)  # (B, 1, T, T)

    def encode(self, seqs: torch.Tensor, train_mode: bool = False) -> torch.Tensor:
        """Hidden states (B, T, d) for left-padded ID rows (B, T)."""
        if seqs.dim() == 1:
            seqs = seqs.unsqueeze(0)
        if seqs.shape[1] != self.config.max_len:
            raise ValueError(
                f"expected sequences of length {self.config.max_len}, got {seqs.shape[1]}"
            )
        if seqs.min() < 0 or seqs.max() >= self.config.vocab_size:
            raise ValueError("item IDs outside 0..vocab_size-1")
        positions = torch.arange(seqs.shape[1], device=seqs.device)
        x = self.item_emb(seqs) + self.pos_emb(positions)
        x = F.dropout(x, self.config.dropout, training=train_mode)
        if not torch.isfinite(x).all():
            raise NumericError("non-finite values after embedding layer")
        allowed = self._attention_mask(seqs)
        for i, block in enumerate(self.blocks):
            x = block(x, allowed, train_mode)
            if not torch.isfinite(x).all():
                raise NumericError(f"non-finite values after block {i}")
        return x

    def score_items(self, hidden: torch.Tensor) -> torch.Tensor:
        """Dot-product scores against items 1..item_count (column j is item j+1)."""
        if not torch.isfinite(hidden).all():
            raise NumericError("non-finite hidden state passed to score_items")
        items = self.item_emb.weight[1 : self.config.item_count + 1]
        return hidden @ items.T

    def sequence_representation(
        self, hidden: torch.Tensor, seqs: torch.Tensor | None = None
    ) -> torch.Tensor:
        """Concatenate all position vectors row-major into (B, T*d).

        Padded positions are included as-is unless the config requests
        zeroing (then ``seqs`` must be given to locate them).
        """
        if hidden.dim() == 2:
            hidden = hidden.unsqueeze(0)
        if self.config.zero_pad_in_repr:
            if seqs is None:
                raise ValueError("zero_pad_in_repr requires the input IDs")
            hidden = hidden * (seqs != 0).unsqueeze(-1).to(hidden.dtype)
        return hidden.reshape(hidden.shape[0], -1)


def backward(loss: torch.Tensor, model: SequenceEncoder) -> dict[str, torch.Tensor]:
    """Reverse-mode gradients of a scalar loss for every model parameter."""
    if loss.dim() != 0:
        raise ValueError("loss must be a scalar")
    if not torch.isfinite(loss):
        raise NumericError("non-finite loss")
    model.zero_grad(set_to_none=True)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        if not torch.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name}")
        grads[name] = g
    return grads


def save_checkpoint(
    path: str,
    model: SequenceEncoder,
    optimizer_state: dict | None = None,
    epoch: int = 0,
    rng_state: dict | None = None,
) -> None:
    payload = {
        "config": asdict(model.config),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer_state,
        "epoch": epoch,
        "rng_state": rng_state,
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        torch.save(payload, fh)


def load_checkpoint(path: str) -> dict:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != CHECKPOINT_MAGIC:
            raise ParseError(f"bad checkpoint file: expected magic {CHECKPOINT_MAGIC!r}", 1)
        return torch.load(fh, weights_only=False)


def encoder_from_checkpoint(blob: dict) -> SequenceEncoder:
    model = SequenceEncoder(EncoderConfig(**blob["config"]))
    model.load_state_dict(blob["model_state"])
    return model
