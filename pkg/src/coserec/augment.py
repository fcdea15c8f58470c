"""Stochastic sequence augmentation operators and the two-view pair sampler.

Five operators produce contrastive views of an item-ID sequence: crop (C),
mask (M) and reorder (R) perturb at random, while substitute (S) and insert
(I) consult an item-correlation table. Sequences at or below a length
threshold are restricted to the {S, I, M} operator set. All operators are
pure functions of (input, parameters, RNG state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationTable

OPERATORS = ("C", "M", "R", "S", "I")
SHORT_OPS_DEFAULT = ("S", "I", "M")
LONG_OPS_DEFAULT = ("S", "I", "M", "C", "R")


def ceil_ratio(ratio: float, n: int) -> int:
    """Number of positions selected by a ratio: ceil(ratio * n)."""
    return math.ceil(ratio * n)


@dataclass
class AugmentParams:
    """Operator ratios, the short-sequence threshold and the operator sets.

    ``fixed_pair`` pins the two view operators (used by pair-wise ablations)
    and bypasses the length dispatch.
    """

    eta: float = 0.5
    mu: float = 0.5
    omega: float = 0.5
    alpha: float = 0.2
    beta: float = 0.2
    short_threshold: int = 12
    short_ops: tuple[str, ...] = SHORT_OPS_DEFAULT
    long_ops: tuple[str, ...] = LONG_OPS_DEFAULT
    fixed_pair: tuple[str, str] | None = None

    def validate(self) -> None:
        for name in ("eta", "mu", "omega", "alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.short_threshold < 1:
            raise ValueError(f"short_threshold must be >= 1, got {self.short_threshold}")
        for name in ("short_ops", "long_ops"):
            ops = getattr(self, name)
            if not ops:
                raise ValueError(f"{name} must be nonempty")
            unknown = set(ops) - set(OPERATORS)
            if unknown:
                raise ValueError(f"unknown operators in {name}: {sorted(unknown)}")
        if "C" in self.short_ops + self.long_ops and self.eta == 0.0:
            raise ValueError("crop requires eta > 0")
        if self.fixed_pair is not None:
            unknown = set(self.fixed_pair) - set(OPERATORS)
            if unknown:
                raise ValueError(f"unknown operators in fixed_pair: {sorted(unknown)}")


@dataclass
class OpStats:
    """Counters for correlation-table misses during informative augmentation."""

    substitute_fallbacks: int = 0
    insert_skips: int = 0


@dataclass(frozen=True)
class AugmentedPair:
    view1: tuple[int, ...]
    view2: tuple[int, ...]
    op1: str
    op2: str


def crop(seq, eta: float, rng: np.random.Generator) -> list[int]:
    """Contiguous window of length ceil(eta * n) at a uniform start."""
    n = len(seq)
    if n < 1:
        raise ValueError("cannot crop an empty sequence")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    c = ceil_ratio(eta, n)
    start = int(rng.integers(0, n - c + 1))
    return list(seq[start : start + c])


def mask(seq, mu: float, mask_token: int, rng: np.random.Generator) -> list[int]:
    """Replace ceil(mu * n) distinct positions with the mask token."""
    n = len(seq)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    out = list(seq)
    k = ceil_ratio(mu, n)
    if k:
        for pos in rng.choice(n, size=k, replace=False):
            out[pos] = mask_token
    return out


def reorder(seq, omega: float, rng: np.random.Generator) -> list[int]:
    """Uniformly permute a contiguous window of length ceil(omega * n)."""
    n = len(seq)
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must be in [0, 1], got {omega}")
    r = ceil_ratio(omega, n)
    out = list(seq)
    if r > 1:
        start = int(rng.integers(0, n - r + 1))
        window = out[start : start + r]
        out[start : start + r] = [window[p] for p in rng.permutation(r)]
    return out


def substitute(
    seq,
    alpha: float,
    corr: CorrelationTable,
    mask_token: int,
    rng: np.random.Generator,
    stats: OpStats | None = None,
) -> list[int]:
    """Replace ceil(alpha * n) distinct positions with their most correlated item.

    Positions whose item has no correlated partner fall back to the mask
    token and are counted in ``stats``.
    """
    n = len(seq)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    out = list(seq)
    k = ceil_ratio(alpha, n)
    if k:
        for pos in rng.choice(n, size=k, replace=False):
            hit = corr.top1(out[pos])
            if hit is None:
                out[pos] = mask_token
                if stats is not None:
                    stats.substitute_fallbacks += 1
            else:
                out[pos] = hit[0]
    return out


def insert(
    seq,
    beta: float,
    corr: CorrelationTable,
    rng: np.random.Generator,
    stats: OpStats | None = None,
) -> list[int]:
    """Insert the most correlated item immediately before each of
    ceil(beta * n) distinct positions; original order is preserved.

    Positions whose item has no correlated partner are skipped and counted.
    """
    n = len(seq)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    k = ceil_ratio(beta, n)
    if not k:
        return list(seq)
    chosen = set(int(i) for i in rng.choice(n, size=k, replace=False))
    out: list[int] = []
    for pos, item in enumerate(seq):
        if pos in chosen:
            hit = corr.top1(item)
            if hit is None:
                if stats is not None:
                    stats.insert_skips += 1
            else:
                out.append(hit[0])
        out.append(item)
    return out


def sample_operator_pair(
    seq_len: int, params: AugmentParams, rng: np.random.Generator
) -> tuple[str, str]:
    """Two independent uniform draws from the length-appropriate operator set."""
    if seq_len < 1:
        raise ValueError("sequence length must be >= 1")
    if params.fixed_pair is not None:
        return params.fixed_pair
    ops = params.short_ops if seq_len <= params.short_threshold else params.long_ops
    return (ops[int(rng.integers(len(ops)))], ops[int(rng.integers(len(ops)))])


def apply_operator(
    op: str,
    seq,
    params: AugmentParams,
    corr: CorrelationTable | None,
    mask_token: int,
    rng: np.random.Generator,
    stats: OpStats | None = None,
) -> list[int]:
    if op == "C":
        return crop(seq, params.eta, rng)
    if op == "M":
        return mask(seq, params.mu, mask_token, rng)
    if op == "R":
        return reorder(seq, params.omega, rng)
    if corr is None:
        raise ValueError(f"operator {op!r} requires a correlation table")
    if op == "S":
        return substitute(seq, params.alpha, corr, mask_token, rng, stats)
    if op == "I":
        return insert(seq, params.beta, corr, rng, stats)
    raise ValueError(f"unknown operator {op!r}")


def augment_pair(
    seq,
    params: AugmentParams,
    corr: CorrelationTable | None,
    mask_token: int,
    rng: np.random.Generator,
    max_len: int,
    stats: OpStats | None = None,
) -> AugmentedPair:
    """Sample an operator pair and apply each to an independent copy of the
    sequence; views longer than ``max_len`` keep only the most recent items."""
    if len(seq) < 1:
        raise ValueError("cannot augment an empty sequence")
    op1, op2 = sample_operator_pair(len(seq), params, rng)
    view1 = apply_operator(op1, seq, params, corr, mask_token, rng, stats)
    view2 = apply_operator(op2, seq, params, corr, mask_token, rng, stats)
    return AugmentedPair(
        view1=tuple(view1[-max_len:]),
        view2=tuple(view2[-max_len:]),
        op1=op1,
        op2=op2,
    )
