import math

import numpy as np
import pytest

from coserec.corpus import (
    Interaction,
    apply_k_core,
    build_corpus,
    corpus_from_sequences,
    inject_test_noise,
    load_corpus,
    load_interactions,
    save_corpus,
    subsample_training,
)
from coserec.errors import EmptyDataError, InvalidCorpusError, ParseError

from helpers import corpus_from_user_items, random_log


class TestLoadInteractions:
    def test_tsv_three_distinct_triples(self, tmp_path):
        p = tmp_path / "log.tsv"
        p.write_text("u1\ta\t3\nu1\tb\t5\nu2\ta\t1\n")
        log = load_interactions(str(p))
        assert len(log) == 3
        assert log[0] == Interaction("u1", "a", 3)

    def test_byte_identical_lines_dedup_to_one(self, tmp_path):
        p = tmp_path / "log.tsv"
        p.write_text("u1\ta\t3\nu1\ta\t3\n")
        assert len(load_interactions(str(p))) == 1

    def test_same_pair_different_timestamp_kept(self, tmp_path):
        p = tmp_path / "log.tsv"
        p.write_text("u1\ta\t3\nu1\ta\t4\n")
        assert len(load_interactions(str(p))) == 2

    def test_non_integer_timestamp_names_line(self, tmp_path):
        p = tmp_path / "log.tsv"
        p.write_text("u1\ta\t3\nu1\tb\tnever\n")
        with pytest.raises(ParseError, match="line 2"):
            load_interactions(str(p))

    def test_empty_file(self, tmp_path):
        p = tmp_path / "log.tsv"
        p.write_text("")
        with pytest.raises(EmptyDataError):
            load_interactions(str(p))

    def test_seq_format_synthesizes_timestamps(self, tmp_path):
        p = tmp_path / "log.txt"
        p.write_text("u1 a b c\nu2 b a\n")
        log = load_interactions(str(p), format="seq")
        assert log[0] == Interaction("u1", "a", 1)
        assert log[2] == Interaction("u1", "c", 3)
        assert log[3] == Interaction("u2", "b", 1)

    def test_unknown_format(self, tmp_path):
        p = tmp_path / "log.tsv"
        p.write_text("u\ta\t1\n")
        with pytest.raises(ValueError):
            load_interactions(str(p), format="csv")


def _log(pairs):
    return [Interaction(u, i, t) for u, i, t in pairs]


class TestKCore:
    def test_already_satisfied_is_unchanged(self):
        log = _log([("u1", "a", 1), ("u1", "b", 2), ("u2", "a", 1), ("u2", "b", 2)])
        assert apply_k_core(log, 2) == log

    def test_cascade_to_empty_raises(self):
        # u2 has one interaction -> removed; item b then has one -> removed;
        # u1 drops to one -> removed; nothing is left.
        log = _log([("u1", "a", 1), ("u1", "b", 2), ("u2", "a", 1)])
        with pytest.raises(EmptyDataError):
            apply_k_core(log, 2)

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            log = random_log(rng, n_users=12, n_items=8)
            try:
                once = apply_k_core(log, 3)
            except EmptyDataError:
                continue
            assert apply_k_core(once, 3) == once

    def test_min_degree_bound_after_filter(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            log = random_log(rng, n_users=30, n_items=10, min_len=4, max_len=12)
            try:
                filtered = apply_k_core(log, 5)
            except EmptyDataError:
                continue
            from collections import Counter
            assert min(Counter(r.user for r in filtered).values()) >= 5
            assert min(Counter(r.item for r in filtered).values()) >= 5

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            apply_k_core(_log([("u", "a", 1)]), 0)


class TestBuildCorpus:
    def test_sorts_by_timestamp(self):
        log = _log([("u1", "c", 3), ("u1", "a", 1), ("u1", "b", 2)])
        corpus = build_corpus(log)
        seq = corpus.sequence(1)
        exts = [corpus.vocabulary.external(i) for i in seq.items]
        assert exts == ["a", "b", "c"]

    def test_timestamp_ties_keep_input_order(self):
        log = _log([("u1", "x", 5), ("u1", "y", 5), ("u1", "z", 5)])
        corpus = build_corpus(log)
        exts = [corpus.vocabulary.external(i) for i in corpus.sequence(1).items]
        assert exts == ["x", "y", "z"]

    def test_leave_one_out_views(self):
        corpus = corpus_from_user_items({"u": ["v1", "v2", "v3", "v4", "v5"]})
        (user, prefix), = corpus.train_view()
        assert prefix == (1, 2, 3)
        val, = corpus.eval_instances("validation")
        assert val.inputs == (1, 2, 3) and val.target == 4
        test, = corpus.eval_instances("test")
        assert test.inputs == (1, 2, 3, 4) and test.target == 5

    def test_no_interactions_lost(self):
        rng = np.random.default_rng(3)
        log = random_log(rng, n_users=15, n_items=10, min_len=3, max_len=9)
        corpus = build_corpus(log)
        rebuilt = []
        for user in corpus.users():
            ext_user = corpus.user_externals[user - 1]
            for item in corpus.sequence(user).items:
                rebuilt.append((ext_user, corpus.vocabulary.external(item)))
        original = sorted((r.user, r.item) for r in log)
        assert sorted(rebuilt) == original

    def test_user_with_too_few_items_rejected(self):
        with pytest.raises(InvalidCorpusError):
            build_corpus(_log([("u1", "a", 1), ("u1", "b", 2)]))

    def test_vocabulary_reserved_ids(self):
        corpus = corpus_from_user_items({"u": list("abcde")})
        v = corpus.vocabulary
        assert v.padding_id == 0
        assert v.mask_id == v.item_count + 1
        assert list(v.item_ids()) == [1, 2, 3, 4, 5]
        assert [v.internal(v.external(i)) for i in v.item_ids()] == list(v.item_ids())

    def test_corpus_from_sequences(self):
        corpus = corpus_from_sequences([[10, 11, 12, 13], [11, 10, 12]])
        assert corpus.n_users == 2
        assert corpus.n_items == 4


class TestSubsample:
    @pytest.fixture()
    def corpus(self):
        rng = np.random.default_rng(5)
        return build_corpus(random_log(rng, n_users=40, n_items=15, min_len=4, max_len=9))

    def test_fraction_one_is_identity(self, corpus):
        assert subsample_training(corpus, 1.0, seed=0) is corpus

    def test_ceiling_count(self, corpus):
        sub = subsample_training(corpus, 0.5, seed=0)
        assert len(sub.train_users) == math.ceil(0.5 * corpus.n_users)
        assert len(subsample_training(corpus, 0.26, seed=0).train_users) == math.ceil(0.26 * 40)

    def test_same_seed_same_subset(self, corpus):
        a = subsample_training(corpus, 0.5, seed=9)
        b = subsample_training(corpus, 0.5, seed=9)
        assert a.train_users == b.train_users

    def test_val_test_views_unchanged(self, corpus):
        sub = subsample_training(corpus, 0.25, seed=1)
        assert sub.eval_instances("validation") == corpus.eval_instances("validation")
        assert sub.eval_instances("test") == corpus.eval_instances("test")

    def test_out_of_range_fraction(self, corpus):
        with pytest.raises(ValueError):
            subsample_training(corpus, 0.0, seed=0)
        with pytest.raises(ValueError):
            subsample_training(corpus, 1.5, seed=0)


class TestNoiseInjection:
    @pytest.fixture()
    def corpus(self):
        rng = np.random.default_rng(8)
        return build_corpus(random_log(rng, n_users=20, n_items=30, min_len=5, max_len=11))

    def test_ratio_zero_is_identity(self, corpus):
        assert inject_test_noise(corpus, 0.0, seed=0) is corpus

    def test_lengths(self):
        corpus = corpus_from_user_items({
            "u": [f"v{i}" for i in range(11)],
            "filler": ["w1", "w2", "w3", "w4"],
        })
        noisy = inject_test_noise(corpus, 0.3, seed=4)
        test = noisy.eval_instances("test")[0]
        # u's test input has 10 items; ceil(0.3 * 10) = 3 inserted
        assert len(test.inputs) == 13

    def test_inserted_items_never_interacted(self, corpus):
        noisy = inject_test_noise(corpus, 0.4, seed=2)
        for inst in noisy.eval_instances("test"):
            seen = corpus.user_items(inst.user)
            original = corpus.sequence(inst.user).items[:-1]
            added = list(inst.inputs)
            for item in original:
                added.remove(item)
            assert not set(added) & seen

    def test_targets_and_training_unchanged(self, corpus):
        noisy = inject_test_noise(corpus, 0.5, seed=3)
        assert noisy.train_view() == corpus.train_view()
        for before, after in zip(corpus.eval_instances("test"), noisy.eval_instances("test")):
            assert before.target == after.target
        assert noisy.eval_instances("validation") == corpus.eval_instances("validation")

    def test_original_order_preserved(self, corpus):
        noisy = inject_test_noise(corpus, 0.5, seed=6)
        for inst in noisy.eval_instances("test"):
            original = list(corpus.sequence(inst.user).items[:-1])
            noisy_inputs = list(inst.inputs)
            # removing the inserted items (never-interacted) recovers the original
            kept = [i for i in noisy_inputs if i in corpus.user_items(inst.user)]
            assert kept == original

    def test_deterministic(self, corpus):
        a = inject_test_noise(corpus, 0.3, seed=5)
        b = inject_test_noise(corpus, 0.3, seed=5)
        assert a.eval_instances("test") == b.eval_instances("test")

    def test_exhausted_vocabulary_skipped(self):
        corpus = corpus_from_user_items({"u": ["a", "b", "c", "a", "b"]})
        # the single user touched all 3 items; nothing can be inserted
        noisy = inject_test_noise(corpus, 0.5, seed=0)
        assert noisy.noise_skipped == 1
        assert noisy.eval_instances("test") == corpus.eval_instances("test")

    def test_ratio_out_of_range(self, corpus):
        with pytest.raises(ValueError):
            inject_test_noise(corpus, 0.6, seed=0)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        corpus = build_corpus(random_log(rng, n_users=12, n_items=9, min_len=3, max_len=8))
        path = tmp_path / "corpus.txt"
        save_corpus(corpus, str(path))
        loaded = load_corpus(str(path))
        assert loaded.vocabulary == corpus.vocabulary
        assert loaded.user_externals == corpus.user_externals
        for user in corpus.users():
            assert loaded.sequence(user) == corpus.sequence(user)

    def test_byte_identical_saves(self, tmp_path):
        corpus = corpus_from_user_items({"u1": list("abcd"), "u2": list("badc")})
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_corpus(corpus, str(p1))
        save_corpus(corpus, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_string_leads_file(self, tmp_path):
        corpus = corpus_from_user_items({"u1": list("abc")})
        path = tmp_path / "c.txt"
        save_corpus(corpus, str(path))
        assert path.read_text().startswith("COSEREC-CORPUS-v1\n")

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("NOT-A-CORPUS\n")
        with pytest.raises(ParseError):
            load_corpus(str(path))
