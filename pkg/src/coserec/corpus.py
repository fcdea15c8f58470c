"""Interaction ingestion, k-core filtering, sequence corpora and their splits.

A corpus is built in three steps: parse raw interactions, iteratively filter
to a k-core, then group per user into chronologically ordered item-ID
sequences with leave-one-out train/validation/test views. Robustness
perturbations (training subsampling, test-time noise injection) produce new
corpora and never mutate the original.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyDataError, InvalidCorpusError, ParseError

logger = logging.getLogger(__name__)

CORPUS_MAGIC = "COSEREC-CORPUS-v1"

PADDING_ID = 0


class Interaction(NamedTuple):
    user: str
    item: str
    timestamp: int


class Vocabulary:
    """Bijection between external item IDs and the internal ID space.

    Internal IDs are 1..item_count; 0 is reserved for padding and
    item_count + 1 for the mask token. Neither reserved ID ever maps to an
    external item.
    """

    def __init__(self, externals: Iterable[str]):
        self._externals = list(externals)
        self._internal = {ext: i + 1 for i, ext in enumerate(self._externals)}
        if len(self._internal) != len(self._externals):
            raise InvalidCorpusError("duplicate external item IDs in vocabulary")

    @property
    def item_count(self) -> int:
        return len(self._externals)

    @property
    def padding_id(self) -> int:
        return PADDING_ID

    @property
    def mask_id(self) -> int:
        return self.item_count + 1

    def item_ids(self) -> range:
        return range(1, self.item_count + 1)

    def internal(self, external: str) -> int:
        try:
            return self._internal[external]
        except KeyError:
            raise KeyError(f"unknown item {external!r}") from None

    def external(self, internal: int) -> str:
        if not 1 <= internal <= self.item_count:
            raise KeyError(f"internal item ID {internal} out of range")
        return self._externals[internal - 1]

    def __contains__(self, external: str) -> bool:
        return external in self._internal

    def __len__(self) -> int:
        return self.item_count

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._externals == other._externals


@dataclass(frozen=True)
class UserSequence:
    """One user's full interaction history as internal item IDs."""

    user: int
    items: tuple[int, ...]


class EvalInstance(NamedTuple):
    user: int
    inputs: tuple[int, ...]
    target: int


class SequenceCorpus:
    """Per-user sequences plus vocabulary and leave-one-out split views.

    For a sequence [v1..vn]: the training prefix is [v1..v_{n-2}], the
    validation instance predicts v_{n-1} from [v1..v_{n-2}], and the test
    instance predicts v_n from [v1..v_{n-1}]. A corpus is immutable;
    perturbed variants share the underlying sequences.
    """

    def __init__(
        self,
        sequences: Sequence[UserSequence],
        vocabulary: Vocabulary,
        user_externals: Sequence[str],
        train_users: frozenset[int] | None = None,
        test_inputs: dict[int, tuple[int, ...]] | None = None,
        noise_skipped: int = 0,
    ):
        self._sequences = {s.user: s for s in sequences}
        if len(self._sequences) != len(sequences):
            raise InvalidCorpusError("duplicate user in corpus")
        self.vocabulary = vocabulary
        self.user_externals = tuple(user_externals)
        self._train_users = train_users
        self._test_inputs = dict(test_inputs or {})
        self.noise_skipped = noise_skipped
        for seq in sequences:
            if len(seq.items) < 3:
                ext = self.user_externals[seq.user - 1]
                raise InvalidCorpusError(
                    f"user {ext!r} has {len(seq.items)} items; "
                    "at least 3 are required for train/validation/test views"
                )
            for it in seq.items:
                if not 1 <= it <= vocabulary.item_count:
                    raise InvalidCorpusError(f"item ID {it} outside 1..{vocabulary.item_count}")

    @property
    def n_users(self) -> int:
        return len(self._sequences)

    @property
    def n_items(self) -> int:
        return self.vocabulary.item_count

    @property
    def n_actions(self) -> int:
        return sum(len(s.items) for s in self._sequences.values())

    def users(self) -> range:
        return range(1, self.n_users + 1)

    def sequence(self, user: int) -> UserSequence:
        return self._sequences[user]

    def user_items(self, user: int) -> frozenset[int]:
        return frozenset(self._sequences[user].items)

    @property
    def train_users(self) -> frozenset[int]:
        if self._train_users is None:
            return frozenset(self.users())
        return self._train_users

    def train_view(self) -> list[tuple[int, tuple[int, ...]]]:
        """(user, training prefix) pairs for users in the training view."""
        keep = self.train_users
        return [
            (u, self._sequences[u].items[:-2])
            for u in sorted(keep)
        ]

    def eval_instances(self, split: str) -> list[EvalInstance]:
        if split == "validation":
            return [
                EvalInstance(u, s.items[:-2], s.items[-2])
                for u, s in sorted(self._sequences.items())
            ]
        if split == "test":
            out = []
            for u, s in sorted(self._sequences.items()):
                inputs = self._test_inputs.get(u, s.items[:-1])
                out.append(EvalInstance(u, tuple(inputs), s.items[-1]))
            return out
        raise ValueError(f"unknown split {split!r}; expected 'validation' or 'test'")

    def stats(self) -> dict[str, float]:
        actions = self.n_actions
        avg_len = actions / self.n_users if self.n_users else 0.0
        density = actions / (self.n_users * self.n_items) if self.n_users and self.n_items else 0.0
        return {
            "users": self.n_users,
            "items": self.n_items,
            "actions": actions,
            "avg_length": avg_len,
            "sparsity": 1.0 - density,
        }

    def _clone(self, **overrides) -> "SequenceCorpus":
        kwargs = dict(
            sequences=list(self._sequences.values()),
            vocabulary=self.vocabulary,
            user_externals=self.user_externals,
            train_users=self._train_users,
            test_inputs=self._test_inputs,
            noise_skipped=self.noise_skipped,
        )
        kwargs.update(overrides)
        return SequenceCorpus(**kwargs)


def load_interactions(path: str, format: str = "tsv") -> list[Interaction]:
    """Parse raw interactions, deduplicated on exact (user, item, timestamp).

    Formats: ``tsv`` is one ``user<TAB>item<TAB>timestamp`` triple per line;
    ``seq`` is one user per line, ``user item1 item2 ...``, already ordered,
    with timestamps synthesized as 1..n.
    """
    if format not in ("tsv", "seq"):
        raise ValueError(f"unknown input format {format!r}; expected 'tsv' or 'seq'")
    seen: set[Interaction] = set()
    log: list[Interaction] = []

    def add(rec: Interaction) -> None:
        if rec not in seen:
            seen.add(rec)
            log.append(rec)

    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if format == "tsv":
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(
                        f"expected 3 tab-separated fields, got {len(parts)}", line_no
                    )
                user, item, ts_raw = parts
                if not user or not item:
                    raise ParseError("empty user or item field", line_no)
                try:
                    ts = int(ts_raw)
                except ValueError:
                    raise ParseError(f"non-integer timestamp {ts_raw!r}", line_no) from None
                add(Interaction(user, item, ts))
            else:
                parts = line.split()
                if len(parts) < 2:
                    raise ParseError("expected a user followed by at least one item", line_no)
                user = parts[0]
                for pos, item in enumerate(parts[1:], start=1):
                    add(Interaction(user, item, pos))
    if not log:
        raise EmptyDataError(f"no interactions parsed from {path}")
    return log


def apply_k_core(log: list[Interaction], k: int) -> list[Interaction]:
    """Iteratively drop users/items with fewer than k interactions until stable."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    current = list(log)
    while True:
        user_deg = Counter(r.user for r in current)
        item_deg = Counter(r.item for r in current)
        kept = [
            r for r in current
            if user_deg[r.user] >= k and item_deg[r.item] >= k
        ]
        if len(kept) == len(current):
            break
        current = kept
    if not current:
        raise EmptyDataError(f"no interactions survive {k}-core filtering")
    return current


def build_corpus(log: list[Interaction]) -> SequenceCorpus:
    """Group interactions into per-user chronological sequences.

    Internal item and user IDs are assigned in first-appearance order over
    the input log; timestamp ties are broken by input order (stable sort), so
    the corpus is a pure function of the log.
    """
    if not log:
        raise EmptyDataError("cannot build a corpus from an empty log")
    item_ids: dict[str, int] = {}
    user_ids: dict[str, int] = {}
    per_user: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for rec in log:
        if rec.item not in item_ids:
            item_ids[rec.item] = len(item_ids) + 1
        if rec.user not in user_ids:
            user_ids[rec.user] = len(user_ids) + 1
        per_user[user_ids[rec.user]].append((rec.timestamp, item_ids[rec.item]))

    vocab = Vocabulary(item_ids.keys())
    user_externals = list(user_ids.keys())
    sequences = []
    for uid in range(1, len(user_ids) + 1):
        events = sorted(per_user[uid], key=lambda e: e[0])
        items = tuple(it for _, it in events)
        if len(items) < 3:
            raise InvalidCorpusError(
                f"user {user_externals[uid - 1]!r} has only {len(items)} interactions; "
                "at least 3 are needed to form train/validation/test views"
            )
        sequences.append(UserSequence(uid, items))
    return SequenceCorpus(sequences, vocab, user_externals)


def corpus_from_sequences(sequences: Iterable[Sequence]) -> SequenceCorpus:
    """Build a corpus from already-ordered item sequences (one per user).

    Item labels may be any hashable values; they become external IDs via
    ``str``. Users are synthesized in input order.
    """
    log: list[Interaction] = []
    for idx, seq in enumerate(sequences):
        user = f"u{idx}"
        for pos, item in enumerate(seq, start=1):
            log.append(Interaction(user, str(item), pos))
    return build_corpus(log)


def subsample_training(corpus: SequenceCorpus, fraction: float, seed: int) -> SequenceCorpus:
    """Keep a uniform ceil(fraction * n_users) subset of users in the training view.

    Validation and test views are unchanged for every user. Pure function of
    (corpus, fraction, seed).
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return corpus
    rng = np.random.default_rng(seed)
    n_keep = math.ceil(fraction * corpus.n_users)
    all_users = np.arange(1, corpus.n_users + 1)
    chosen = rng.choice(all_users, size=n_keep, replace=False)
    return corpus._clone(train_users=frozenset(int(u) for u in chosen))


def inject_test_noise(corpus: SequenceCorpus, ratio: float, seed: int) -> SequenceCorpus:
    """Insert ceil(ratio * n) never-interacted items into each test input.

    Insert positions are uniform; inserted items are drawn uniformly from the
    items the user never touched (duplicates among insertions allowed). Test
    targets and the training view are unchanged. Users who interacted with
    the whole vocabulary are skipped and counted in ``noise_skipped``.
    """
    if not 0.0 <= ratio <= 0.5:
        raise ValueError(f"noise ratio must be in [0, 0.5], got {ratio}")
    if ratio == 0.0:
        return corpus
    rng = np.random.default_rng(seed)
    all_items = np.arange(1, corpus.n_items + 1)
    overrides: dict[int, tuple[int, ...]] = {}
    skipped = 0
    for user in corpus.users():
        seq = corpus.sequence(user)
        inputs = list(seq.items[:-1])
        candidates = np.setdiff1d(all_items, np.asarray(seq.items), assume_unique=False)
        if candidates.size == 0:
            skipped += 1
            continue
        k = math.ceil(ratio * len(inputs))
        for _ in range(k):
            noise_item = int(candidates[rng.integers(candidates.size)])
            pos = int(rng.integers(len(inputs) + 1))
            inputs.insert(pos, noise_item)
        overrides[user] = tuple(inputs)
    if skipped:
        logger.warning("noise injection skipped %d users with exhausted vocabulary", skipped)
    return corpus._clone(test_inputs=overrides, noise_skipped=skipped)


def save_corpus(corpus: SequenceCorpus, path: str) -> None:
    """Write a corpus as a line-oriented UTF-8 file with a leading magic string.

    The encoding is a pure function of the corpus, so repeated saves are
    byte-identical.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{CORPUS_MAGIC}\n")
        fh.write(f"items {corpus.n_items}\n")
        fh.write(f"users {corpus.n_users}\n")
        for item_id in corpus.vocabulary.item_ids():
            fh.write(f"i {corpus.vocabulary.external(item_id)}\n")
        for user in corpus.users():
            ext = corpus.user_externals[user - 1]
            items = " ".join(str(i) for i in corpus.sequence(user).items)
            fh.write(f"u {ext} {items}\n")


def load_corpus(path: str) -> SequenceCorpus:
    """Read a corpus written by :func:`save_corpus`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CORPUS_MAGIC:
            raise ParseError(f"bad corpus file: expected magic {CORPUS_MAGIC!r}", 1)
        try:
            n_items = int(fh.readline().split()[1])
            n_users = int(fh.readline().split()[1])
        except (IndexError, ValueError):
            raise ParseError("bad corpus header counts") from None
        externals = []
        for line_no in range(4, 4 + n_items):
            parts = fh.readline().rstrip("\n").split(" ", 1)
            if len(parts) != 2 or parts[0] != "i":
                raise ParseError("expected an item line", line_no)
            externals.append(parts[1])
        vocab = Vocabulary(externals)
        sequences = []
        user_externals = []
        for offset in range(n_users):
            line_no = 4 + n_items + offset
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) < 2 or parts[0] != "u":
                raise ParseError("expected a user line", line_no)
            user_externals.append(parts[1])
            try:
                items = tuple(int(x) for x in parts[2:])
            except ValueError:
                raise ParseError("non-integer item ID in user line", line_no) from None
            sequences.append(UserSequence(offset + 1, items))
    return SequenceCorpus(sequences, vocab, user_externals)
