"""Synthetic corpora with planted structure for desk-scale experiments.

Items are partitioned into clusters; every item carries a planted transition
distribution concentrated on its own cluster, and user sequences are random
walks through those distributions. The planted structure gives training
signal that a next-item model can actually learn at small scale.
"""

from __future__ import annotations

import numpy as np

from .corpus import Interaction, SequenceCorpus, build_corpus


def planted_markov_corpus(
    n_users: int = 1000,
    n_items: int = 200,
    n_clusters: int = 4,
    min_len: int = 8,
    max_len: int = 20,
    stay_prob: float = 0.9,
    concentration: float = 0.15,
    seed: int = 0,
) -> SequenceCorpus:
    """Corpus of random walks over a planted cluster transition model.

    From item i the next item is drawn from i's planted Dirichlet row over
    its own cluster with probability ``stay_prob``, otherwise uniformly from
    the whole catalog. Lower ``concentration`` makes rows sharper and the
    next item more predictable. Sequence lengths are uniform on
    [min_len, max_len].
    """
    if n_items % n_clusters != 0:
        raise ValueError("n_items must be divisible by n_clusters")
    if not 2 <= min_len <= max_len:
        raise ValueError("need 2 <= min_len <= max_len")
    rng = np.random.default_rng(seed)
    per_cluster = n_items // n_clusters

    rows = np.zeros((n_items, n_items))
    for item in range(n_items):
        cluster = item // per_cluster
        lo = cluster * per_cluster
        within = rng.dirichlet(np.full(per_cluster, concentration))
        rows[item, lo : lo + per_cluster] = stay_prob * within
        rows[item] += (1.0 - stay_prob) / n_items

    log: list[Interaction] = []
    catalog = np.arange(n_items)
    for u in range(n_users):
        length = int(rng.integers(min_len, max_len + 1))
        item = int(rng.integers(n_items))
        for t in range(1, length + 1):
            log.append(Interaction(f"u{u:04d}", f"i{item:03d}", t))
            item = int(rng.choice(catalog, p=rows[item]))
    return build_corpus(log)
