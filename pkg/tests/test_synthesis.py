import dataclasses

import numpy as np
import pytest

from segctc import (
    ConfigError,
    CorpusConfig,
    VersionMismatchError,
    class_means,
    clean_references,
    dedup,
    eval_split,
    gen_corpus,
    load_corpus,
    save_corpus,
)
from segctc.synthesis import shift_run_boundaries

BASE = CorpusConfig(
    utterances=8,
    frames=60,
    vocab=6,
    feature_dim=5,
    self_loop=0.85,
    sigma=0.4,
    jitter_k=2,
    jitter_q=0.6,
    corrupt_r=0.1,
    seed=3,
)


class TestConfigValidation:
    def test_vocab_too_small(self):
        with pytest.raises(ConfigError):
            dataclasses.replace(BASE, vocab=1)

    def test_probability_out_of_range(self):
        with pytest.raises(ConfigError):
            dataclasses.replace(BASE, jitter_q=1.5)
        with pytest.raises(ConfigError):
            dataclasses.replace(BASE, self_loop=-0.1)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            dataclasses.replace(BASE, sigma=-1.0)


class TestShiftRunBoundaries:
    def test_plus_one_shift_extends_first_run(self):
        # true runs [187 x2, 288 x3]; boundary moves right by one
        lengths = shift_run_boundaries([2, 3], [1])
        np.testing.assert_array_equal(lengths, [3, 2])
        noisy = np.repeat([187, 288], lengths)
        np.testing.assert_array_equal(noisy, [187, 187, 187, 288, 288])
        np.testing.assert_array_equal(dedup(noisy), dedup([187, 187, 288, 288, 288]))

    def test_rejects_annihilating_shift(self):
        # shifting by -2 would empty the first run; boundary stays put
        np.testing.assert_array_equal(shift_run_boundaries([2, 3], [-2]), [2, 3])
        np.testing.assert_array_equal(shift_run_boundaries([2, 3], [-1]), [1, 4])

    def test_rejects_boundary_crossing(self):
        # second boundary at 4 cannot move past the third run's end
        np.testing.assert_array_equal(shift_run_boundaries([2, 2, 1], [0, 1]), [2, 2, 1])

    def test_sequential_left_to_right_application(self):
        # first boundary moves right to 3; second may then move left to 4
        np.testing.assert_array_equal(shift_run_boundaries([2, 3, 3], [1, -1]), [3, 1, 4])

    def test_total_frames_preserved(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n_runs = int(rng.integers(1, 8))
            lengths = rng.integers(1, 6, size=n_runs)
            offsets = rng.integers(-3, 4, size=max(0, n_runs - 1))
            shifted = shift_run_boundaries(lengths, offsets)
            assert shifted.sum() == lengths.sum()
            assert np.all(shifted >= 1)


class TestGenCorpus:
    def test_no_noise_gives_identical_ids(self):
        cfg = dataclasses.replace(BASE, jitter_q=0.0, corrupt_r=0.0)
        for utt in gen_corpus(cfg).utterances:
            np.testing.assert_array_equal(utt.true_ids, utt.noisy_ids)

    def test_jitter_only_preserves_dedup(self):
        cfg = dataclasses.replace(BASE, corrupt_r=0.0, jitter_q=0.8, jitter_k=3)
        for utt in gen_corpus(cfg).utterances:
            np.testing.assert_array_equal(dedup(utt.true_ids), dedup(utt.noisy_ids))

    def test_sigma_zero_nearest_mean_recovers_ids(self):
        cfg = dataclasses.replace(BASE, sigma=0.0)
        corpus = gen_corpus(cfg)
        means = class_means(cfg)
        for utt in corpus.utterances:
            distances = ((utt.features[:, None, :] - means[None]) ** 2).sum(axis=2)
            np.testing.assert_array_equal(distances.argmin(axis=1), utt.true_ids)

    def test_deterministic(self):
        a = gen_corpus(BASE)
        b = gen_corpus(BASE)
        for ua, ub in zip(a.utterances, b.utterances):
            np.testing.assert_array_equal(ua.features, ub.features)
            np.testing.assert_array_equal(ua.true_ids, ub.true_ids)
            np.testing.assert_array_equal(ua.noisy_ids, ub.noisy_ids)

    def test_streams_are_disjoint(self):
        a = gen_corpus(BASE, stream=0)
        b = gen_corpus(BASE, stream=1)
        assert not np.array_equal(a.utterances[0].true_ids, b.utterances[0].true_ids)

    def test_stationary_distribution_is_uniform(self):
        cfg = dataclasses.replace(
            BASE, utterances=40, frames=3000, vocab=5, sigma=0.0, seed=11
        )
        ids = np.concatenate([u.true_ids for u in gen_corpus(cfg).utterances])
        assert ids.size >= 10**5
        freqs = np.bincount(ids, minlength=5) / ids.size
        np.testing.assert_allclose(freqs, 0.2, atol=0.015)

    def test_class_means_unit_norm(self):
        means = class_means(BASE)
        np.testing.assert_allclose(np.linalg.norm(means, axis=1), 1.0, atol=1e-12)


class TestEvalSplit:
    def test_shares_true_sequences_and_features(self):
        clean, jittered = eval_split(BASE, 5)
        for uc, uj in zip(clean.utterances, jittered.utterances):
            np.testing.assert_array_equal(uc.true_ids, uj.true_ids)
            np.testing.assert_array_equal(uc.features, uj.features)
            np.testing.assert_array_equal(uc.noisy_ids, uc.true_ids)

    def test_jittered_references_are_jitter_only(self):
        _, jittered = eval_split(BASE, 10)
        for utt in jittered.utterances:
            np.testing.assert_array_equal(dedup(utt.true_ids), dedup(utt.noisy_ids))

    def test_no_jitter_makes_splits_identical(self):
        cfg = dataclasses.replace(BASE, jitter_q=0.0, corrupt_r=0.0)
        clean, jittered = eval_split(cfg, 5)
        for uc, uj in zip(clean.utterances, jittered.utterances):
            np.testing.assert_array_equal(uc.noisy_ids, uj.noisy_ids)


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        corpus = gen_corpus(BASE)
        path = tmp_path / "c.corpus"
        save_corpus(corpus, path)
        loaded = load_corpus(path)
        assert loaded.vocab == corpus.vocab
        assert len(loaded.utterances) == len(corpus.utterances)
        for a, b in zip(corpus.utterances, loaded.utterances):
            np.testing.assert_array_equal(a.features.astype(np.float32), b.features)
            np.testing.assert_array_equal(a.true_ids, b.true_ids)
            np.testing.assert_array_equal(a.noisy_ids, b.noisy_ids)

    def test_save_is_deterministic(self, tmp_path):
        first = tmp_path / "a.corpus"
        second = tmp_path / "b.corpus"
        save_corpus(gen_corpus(BASE), first)
        save_corpus(gen_corpus(BASE), second)
        assert first.read_bytes() == second.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.corpus"
        path.write_bytes(b"JUNK" + b"\x00" * 32)
        with pytest.raises(VersionMismatchError):
            load_corpus(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.corpus"
        save_corpus(gen_corpus(BASE), path)
        path.write_bytes(path.read_bytes()[:40])
        with pytest.raises(VersionMismatchError):
            load_corpus(path)

    def test_clean_references_copies(self):
        corpus = gen_corpus(BASE)
        clean = clean_references(corpus)
        for a, b in zip(corpus.utterances, clean.utterances):
            np.testing.assert_array_equal(b.noisy_ids, a.true_ids)
        clean.utterances[0].noisy_ids[0] = 99
        assert corpus.utterances[0].true_ids[0] != 99
