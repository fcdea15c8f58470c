"""Item-to-item correlation tables backing the informative augmentations.

Three score sources: a memory-based co-occurrence score with inverse user
frequency weighting, a model-based embedding dot-product score, and their
hybrid, which min-max normalizes each source globally over all off-diagonal
pairs and takes the pointwise max. Tables serve top-correlated-item queries;
self-pairs are always excluded.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from typing import Callable

import numpy as np

from .corpus import SequenceCorpus
from .errors import NumericError

logger = logging.getLogger(__name__)


class CorrelationTable:
    """Top-correlated-item lookup plus dense score access for inspection.

    ``top1`` maps item -> (most correlated item, score); items without any
    scored partner are absent. Ties are broken toward the lowest item ID, so
    queries are deterministic.
    """

    def __init__(
        self,
        kind: str,
        top1: dict[int, tuple[int, float]],
        item_count: int,
        score_fn: Callable[[int, int], float],
        epoch_built: int = 0,
    ):
        self.kind = kind
        self._top1 = top1
        self.item_count = item_count
        self._score_fn = score_fn
        self.epoch_built = epoch_built
        for item, (partner, score) in top1.items():
            if partner == item:
                raise ValueError(f"self-correlation stored for item {item}")
            if not math.isfinite(score):
                raise NumericError(f"non-finite correlation score for item {item}")

    def top1(self, item: int) -> tuple[int, float] | None:
        return self._top1.get(item)

    def score(self, i: int, j: int) -> float:
        """Dense pairwise score; 0 for never-scored memory pairs."""
        if i == j:
            raise ValueError("self-pairs are excluded from correlation scores")
        return self._score_fn(i, j)

    def items_with_partner(self) -> list[int]:
        return sorted(self._top1)


def _row_best(row: dict[int, float]) -> tuple[int, float]:
    """Argmax of a sparse row with exact tie-break toward the lowest ID."""
    best_j = None
    best_s = -math.inf
    for j in sorted(row):
        if row[j] > best_s:
            best_s = row[j]
            best_j = j
    return best_j, best_s


def memory_correlation(corpus: SequenceCorpus, log_base: float = math.e) -> CorrelationTable:
    """Co-occurrence correlation over the training view with IUF weighting.

    For items i, j sharing at least one user:
    score = (1 / sqrt(|N(i)| |N(j)|)) * sum over common users u of
    1 / log(1 + |N(u)|), where N(i) is the set of training users of item i
    and |N(u)| the number of distinct items in u's training prefix. The log
    base only rescales scores uniformly, so top-1 queries are base-invariant.
    """
    view = corpus.train_view()
    if not view:
        raise ValueError("empty training view")
    scale = math.log(log_base)  # log_base(x) = ln(x) / ln(base)
    deg: Counter = Counter()
    pair_acc: dict[tuple[int, int], float] = defaultdict(float)
    for _user, prefix in view:
        items = sorted(set(prefix))
        if not items:
            continue
        weight = scale / math.log(1 + len(items))
        for it in items:
            deg[it] += 1
        for a in range(len(items)):
            for b in range(a + 1, len(items)):
                pair_acc[(items[a], items[b])] += weight

    rows: dict[int, dict[int, float]] = defaultdict(dict)
    for (i, j), acc in pair_acc.items():
        s = acc / math.sqrt(deg[i] * deg[j])
        rows[i][j] = s
        rows[j][i] = s

    top1 = {}
    for i, row in rows.items():
        j, s = _row_best(row)
        top1[i] = (j, s)

    def score_fn(i: int, j: int) -> float:
        return rows.get(i, {}).get(j, 0.0)

    table = CorrelationTable("memory", top1, corpus.n_items, score_fn)
    table._rows = rows
    table._pair_count = len(pair_acc)
    return table


def model_correlation(
    embeddings: np.ndarray, item_count: int | None = None, block: int = 1024
) -> CorrelationTable:
    """Dot-product correlation over item embedding rows 1..item_count.

    ``embeddings`` is the full table including padding row 0 and the mask row
    at the end; both reserved rows are excluded. Scores are computed in
    blocks, materializing only per-item argmaxes plus the global off-diagonal
    min/max (needed for hybrid normalization).
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if not np.isfinite(emb).all():
        raise NumericError("non-finite value in item embedding table")
    if item_count is None:
        item_count = emb.shape[0] - 2
    items = emb[1 : item_count + 1]
    n = items.shape[0]
    if n < 1:
        raise ValueError("embedding table holds no items")

    top1: dict[int, tuple[int, float]] = {}
    global_min = math.inf
    global_max = -math.inf
    for start in range(0, n, block):
        stop = min(start + block, n)
        scores = items[start:stop] @ items.T  # (stop-start, n)
        for local in range(stop - start):
            scores[local, start + local] = -math.inf
        if n > 1:
            finite = scores[np.isfinite(scores)]
            global_min = min(global_min, float(finite.min()))
            global_max = max(global_max, float(finite.max()))
            arg = np.argmax(scores, axis=1)  # first max = lowest ID
            for local, j in enumerate(arg):
                i = start + local + 1
                top1[i] = (int(j) + 1, float(scores[local, j]))

    def score_fn(i: int, j: int) -> float:
        return float(items[i - 1] @ items[j - 1])

    table = CorrelationTable("model", top1, n, score_fn)
    table._embeddings = items
    table._score_range = (global_min, global_max) if n > 1 else (0.0, 0.0)
    return table


def _normalizer(lo: float, hi: float, kind: str) -> Callable[[float], float]:
    if hi > lo:
        span = hi - lo
        return lambda x: (x - lo) / span
    logger.warning("degenerate %s correlation source (max == min); normalizing to zeros", kind)
    return lambda x: 0.0


def hybrid_correlation(mem: CorrelationTable, model: CorrelationTable) -> CorrelationTable:
    """Pointwise max of the two globally min-max-normalized score sources.

    Each source is normalized over all its off-diagonal entries; for the
    sparse memory source the never-co-occurring pairs count as zeros in that
    range. A degenerate source (max == min) normalizes to all zeros.
    """
    if mem.kind != "memory" or model.kind != "model":
        raise ValueError("hybrid_correlation expects (memory, model) tables")
    if mem.item_count != model.item_count:
        raise ValueError("correlation tables cover different vocabularies")
    n = mem.item_count

    mem_rows: dict[int, dict[int, float]] = mem._rows
    mem_scores = [s for row in mem_rows.values() for s in row.values()]
    total_pairs = n * (n - 1)
    stored_pairs = sum(len(row) for row in mem_rows.values())
    if mem_scores:
        mem_hi = max(mem_scores)
        mem_lo = min(mem_scores) if stored_pairs == total_pairs else min(0.0, min(mem_scores))
    else:
        mem_hi = mem_lo = 0.0
    norm_mem = _normalizer(mem_lo, mem_hi, "memory")

    mdl_lo, mdl_hi = model._score_range
    norm_mdl = _normalizer(mdl_lo, mdl_hi, "model")

    top1: dict[int, tuple[int, float]] = {}
    for i in range(1, n + 1):
        if n == 1:
            break
        mdl_best = model.top1(i)
        v_e = norm_mdl(mdl_best[1])
        j_e = mdl_best[0]
        row = mem_rows.get(i, {})
        if row:
            j_m, raw = _row_best(row)
            v_m = norm_mem(raw)
        else:
            j_m, v_m = None, 0.0
        best = max(v_e, v_m)
        if best == 0.0:
            # every entry of the combined row is zero; lowest other ID wins
            top1[i] = (1 if i != 1 else 2, 0.0)
        elif v_e > v_m:
            top1[i] = (j_e, v_e)
        elif v_m > v_e:
            top1[i] = (j_m, v_m)
        else:
            top1[i] = (min(j_e, j_m), best)

    def score_fn(i: int, j: int) -> float:
        return max(norm_mem(mem.score(i, j)), norm_mdl(model.score(i, j)))

    table = CorrelationTable("hybrid", top1, n, score_fn)
    table._sources = (mem, model)
    return table


def correlation_for_epoch(
    epoch: int,
    switch_epoch: int,
    mem: CorrelationTable,
    model_provider: Callable[[], np.ndarray],
) -> CorrelationTable:
    """Memory table up to the switch epoch, then a hybrid rebuilt from the
    current item embeddings (snapshot taken at epoch start)."""
    if switch_epoch < 0:
        raise ValueError(f"switch epoch must be >= 0, got {switch_epoch}")
    if epoch <= switch_epoch:
        return mem
    model = model_correlation(model_provider(), item_count=mem.item_count)
    table = hybrid_correlation(mem, model)
    table.epoch_built = epoch
    return table


def dump_top1_tsv(table: CorrelationTable, path: str) -> None:
    """Write the top-1 mapping as ``item<TAB>correlated_item<TAB>score``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in table.items_with_partner():
            partner, score = table.top1(item)
            fh.write(f"{item}\t{partner}\t{score!r}\n")
