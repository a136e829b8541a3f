import numpy as np
import pytest

from spotcheck.data import DataError, Dataset, Schema
from spotcheck.embeddings import (
    GRANULARITIES,
    EmbeddingConfig,
    EmbeddingModel,
    corpus_for,
    cosine_similarity,
    fit_embeddings,
    subword_ids,
    train_sgns,
)

SMALL = EmbeddingConfig(dims=16, epochs=30, batch_size=64, seed=3)


# -- independent FNV-1a oracle for bucket assignment --


def fnv1a_oracle(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def bucket_oracle(token: str, n_buckets: int) -> list[int]:
    padded = f"<{token}>"
    grams = {
        padded[i : i + n]
        for n in (3, 4, 5)
        for i in range(len(padded) - n + 1)
    }
    return sorted({fnv1a_oracle(g.encode("utf-8")) % n_buckets for g in grams})


class TestSubwordIds:
    def test_short_token_grams(self):
        # "<ab>" has 3-grams "<ab","ab>" and the 4-gram "<ab>"
        assert subword_ids("ab", 2048) == bucket_oracle("ab", 2048)
        assert len(subword_ids("ab", 1 << 30)) == 3

    def test_repeated_grams_deduplicated(self):
        ids = subword_ids("aaaa", 2048)
        assert ids == sorted(set(ids)) == bucket_oracle("aaaa", 2048)

    def test_empty_token_uses_boundary_pad(self):
        # "<>" is shorter than any gram window
        assert subword_ids("", 2048) == []

    def test_matches_oracle_for_longer_tokens(self):
        for token in ("chicago", "60612", "a b", "ü-umlaut"):
            assert subword_ids(token, 512) == bucket_oracle(token, 512)


class TestCorpora:
    def setup_method(self):
        self.ds = Dataset(
            Schema(("city", "zip")),
            [("new york", "10001"), ("", "  "), ("chicago", "60612")],
        )

    def test_character_corpus_skips_empty_values(self):
        sentences, bag = corpus_for(self.ds, "character")
        assert bag is False
        assert sentences[0] == list("new york")
        assert ["1", "0", "0", "0", "1"] in sentences
        assert [] not in sentences
        assert [" ", " "] in sentences  # whitespace-only is still characters

    def test_cell_token_corpus_skips_blank_values(self):
        sentences, bag = corpus_for(self.ds, "cell-token")
        assert bag is False
        assert ["new", "york"] in sentences
        assert all(s for s in sentences)
        assert len(sentences) == 4  # "" and "  " dropped

    def test_tuple_bag_one_sentence_per_row(self):
        sentences, bag = corpus_for(self.ds, "tuple-bag")
        assert bag is True
        assert len(sentences) == 3
        assert sentences[0] == ["new", "york", "10001"]

    def test_dataset_neighbor_uses_whole_values(self):
        sentences, bag = corpus_for(self.ds, "dataset-neighbor")
        assert bag is True
        assert sentences[2] == ["chicago", "60612"]

    def test_unknown_granularity(self):
        with pytest.raises(DataError, match="granularity"):
            corpus_for(self.ds, "paragraph")


class TestTrainSgns:
    def test_deterministic_per_seed(self):
        sents = [["a", "b", "c"], ["b", "c", "d"]] * 10
        m1 = train_sgns(sents, False, SMALL, "character")
        m2 = train_sgns(sents, False, SMALL, "character")
        assert np.array_equal(m1.vectors, m2.vectors)
        m3 = train_sgns(sents, False, EmbeddingConfig(dims=16, epochs=30, seed=4), "character")
        assert not np.array_equal(m1.vectors, m3.vectors)

    def test_vocabulary_is_sorted(self):
        m = train_sgns([["b", "a"], ["c", "a"]], False, SMALL, "x")
        assert list(m.vocabulary) == ["a", "b", "c"]
        assert m.vectors.shape == (3, 16)

    def test_empty_corpus_raises(self):
        with pytest.raises(DataError, match="empty corpus"):
            train_sgns([], False, SMALL, "character")
        with pytest.raises(DataError, match="empty corpus"):
            train_sgns([[], []], False, SMALL, "character")

    def test_shared_context_tokens_end_up_closer(self):
        # "a" and "b" both co-occur with "c" (same distributional profile);
        # "z" never shares a context with "a".
        sents = ([["a", "c"]] * 40 + [["b", "c"]] * 40 + [["z", "q"]] * 80)
        m = train_sgns(sents, False, EmbeddingConfig(dims=16, epochs=80, seed=1), "x")
        close = cosine_similarity(m.vector("a"), m.vector("b"))
        far = cosine_similarity(m.vector("a"), m.vector("z"))
        assert close > far

    def test_hot_token_stays_bounded(self):
        # one token in every pair used to diverge under summed batch updates
        sents = [["hub", f"t{i}"] for i in range(200)] * 3
        m = train_sgns(sents, False, EmbeddingConfig(dims=16, epochs=40, batch_size=4096, seed=0), "x")
        assert np.all(np.isfinite(m.vectors))
        assert np.abs(m.vectors).max() < 100.0

    def test_single_token_sentences_yield_no_pairs(self):
        m = train_sgns([["solo"]], False, SMALL, "x")
        # no training pairs: vectors stay at their tiny random init
        assert np.abs(m.vectors).max() <= 0.5 / 16


class TestEmbeddingModel:
    def make_model(self):
        sents = [["alpha", "beta"], ["beta", "gamma"]] * 5
        return train_sgns(sents, False, SMALL, "x")

    def test_in_vocab_lookup_is_exact_row(self):
        m = self.make_model()
        idx = m.vocabulary["beta"]
        assert np.array_equal(m.vector("beta"), m.vectors[idx])

    def test_oov_vector_is_mean_of_filled_buckets(self):
        m = self.make_model()
        token = "alphq"  # shares "<al", "alp", ... with "alpha"
        ids = [b for b in subword_ids(token, len(m.bucket_vectors)) if m.bucket_filled[b]]
        assert ids, "test token must share at least one bucket"
        expected = m.bucket_vectors[ids].mean(axis=0)
        assert np.allclose(m.vector(token), expected)
        assert np.any(m.vector(token) != 0.0)

    def test_oov_cache_returns_same_array(self):
        m = self.make_model()
        assert m.vector("alphq") is m.vector("alphq")

    def test_unfilled_buckets_give_zero_vector(self):
        m = EmbeddingModel(
            granularity="x",
            vocabulary={"a": 0},
            vectors=np.ones((1, 4)),
            bucket_vectors=np.ones((8, 4)),
            bucket_filled=np.zeros(8, dtype=bool),
        )
        assert np.array_equal(m.vector("zzz"), np.zeros(4))

    def test_bucket_vectors_are_member_means(self):
        m = self.make_model()
        buckets = len(m.bucket_vectors)
        members = {}
        for tok, idx in m.vocabulary.items():
            for b in subword_ids(tok, buckets):
                members.setdefault(b, []).append(idx)
        for b, idxs in members.items():
            assert m.bucket_filled[b]
            assert np.allclose(m.bucket_vectors[b], m.vectors[idxs].mean(axis=0))

    def test_mean_vector(self):
        m = self.make_model()
        got = m.mean_vector(["alpha", "beta"])
        expected = (m.vector("alpha") + m.vector("beta")) / 2
        assert np.allclose(got, expected)
        assert np.array_equal(m.mean_vector([]), np.zeros(16))


class TestCosine:
    def test_aligned(self):
        assert cosine_similarity(np.array([2.0, 0.0]), np.array([5.0, 0.0])) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == pytest.approx(0.0)

    def test_hand_value(self):
        got = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert got == pytest.approx(1 / np.sqrt(2))

    def test_zero_vector_defined_as_zero(self):
        assert cosine_similarity(np.zeros(3), np.array([1.0, 2.0, 3.0])) == 0.0


class TestFitEmbeddings:
    def test_all_granularities_present(self):
        ds = Dataset(
            Schema(("a", "b")),
            [("one two", "10"), ("three", "20"), ("one", "10")],
        )
        models = fit_embeddings(ds, EmbeddingConfig(dims=8, epochs=2))
        assert set(models) == set(GRANULARITIES)
        for g, m in models.items():
            assert m.granularity == g
            assert m.dims == 8

    def test_empty_dataset_rejected(self):
        ds = Dataset(Schema(("a",)), [])
        with pytest.raises(DataError, match="empty dataset"):
            fit_embeddings(ds)

    def test_whitespace_only_dataset_falls_back_for_token_corpora(self):
        ds = Dataset(Schema(("a",)), [("  ",), (" ",)])
        with pytest.warns(UserWarning, match="corpus is empty"):
            models = fit_embeddings(ds, EmbeddingConfig(dims=8, epochs=1))
        assert set(models) == set(GRANULARITIES)

    def test_granularity_models_use_distinct_seeds(self):
        ds = Dataset(Schema(("a", "b")), [("x", "y"), ("y", "x")])
        models = fit_embeddings(ds, EmbeddingConfig(dims=8, epochs=0, seed=9))
        # same vocabulary {x, y} everywhere, but per-granularity seed offsets
        # give different random initializations
        char = models["character"].vectors
        neigh = models["dataset-neighbor"].vectors
        assert char.shape == neigh.shape
        assert not np.array_equal(char, neigh)
