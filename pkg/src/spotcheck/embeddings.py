"""Corpus embeddings: skip-gram with negative sampling over four data views.

Each view of a dataset is treated as its own language and embedded in d=50
dimensions:

- character: each cell value as a sequence of characters;
- cell-token: each cell value as a sequence of whitespace tokens;
- tuple-bag: each tuple as an order-free bag of its values' tokens;
- dataset-neighbor: each tuple as an order-free bag of whole, non-tokenized
  cell values.

Bag views use every other token of the sentence as context; sequence views
use a sliding window. After training, character 3..5-gram bucket vectors are
derived as means over the trained vectors of the vocabulary tokens containing
each n-gram, so out-of-vocabulary strings (corrupted or synthetic values)
always embed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, Dataset

GRANULARITIES = ("character", "cell-token", "tuple-bag", "dataset-neighbor")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def subword_ids(token: str, n_buckets: int) -> list[int]:
    """Bucket ids of the token's boundary-padded character 3..5-grams."""
    padded = "<" + token + ">"
    seen = set()
    for n in (3, 4, 5):
        for i in range(len(padded) - n + 1):
            seen.add(_fnv1a(padded[i : i + n].encode("utf-8")) % n_buckets)
    return sorted(seen)


@dataclass(frozen=True)
class EmbeddingConfig:
    dims: int = 50
    epochs: int = 5
    window: int = 2
    negatives: int = 5
    lr: float = 0.025
    batch_size: int = 4096
    buckets: int = 2048
    seed: int = 0


@dataclass
class EmbeddingModel:
    """Trained token vectors for one granularity, with subword fallback."""

    granularity: str
    vocabulary: dict[str, int]
    vectors: np.ndarray  # (V, d)
    bucket_vectors: np.ndarray  # (buckets, d)
    bucket_filled: np.ndarray  # (buckets,) bool
    _oov_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dims(self) -> int:
        return self.vectors.shape[1]

    def vector(self, token: str) -> np.ndarray:
        """In-vocabulary lookup, else mean of filled subword bucket vectors."""
        idx = self.vocabulary.get(token)
        if idx is not None:
            return self.vectors[idx]
        cached = self._oov_cache.get(token)
        if cached is None:
            ids = [b for b in subword_ids(token, len(self.bucket_vectors)) if self.bucket_filled[b]]
            if ids:
                cached = self.bucket_vectors[ids].mean(axis=0)
            else:
                cached = np.zeros(self.dims)
            self._oov_cache[token] = cached
        return cached

    def mean_vector(self, tokens) -> np.ndarray:
        """Mean of token vectors; zero vector for an empty token list."""
        tokens = list(tokens)
        if not tokens:
            return np.zeros(self.dims)
        out = np.zeros(self.dims)
        for t in tokens:
            out += self.vector(t)
        return out / len(tokens)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _sentence_pairs(sentence: list[int], bag: bool, window: int, out: list):
    n = len(sentence)
    if n < 2:
        return
    for i in range(n):
        if bag:
            for j in range(n):
                if j != i:
                    out.append((sentence[i], sentence[j]))
        else:
            lo, hi = max(0, i - window), min(n, i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    out.append((sentence[i], sentence[j]))


def train_sgns(
    sentences: list[list[str]], bag: bool, config: EmbeddingConfig, granularity: str
) -> EmbeddingModel:
    """Train one skip-gram negative-sampling model; deterministic per seed."""
    counts: dict[str, int] = {}
    for sent in sentences:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        raise DataError(f"empty corpus for {granularity} embeddings")
    vocab_list = sorted(counts)
    vocab = {t: i for i, t in enumerate(vocab_list)}
    v_size, d = len(vocab_list), config.dims

    rng = np.random.RandomState(config.seed & 0xFFFFFFFF)
    w_in = (rng.rand(v_size, d) - 0.5) / d
    w_out = np.zeros((v_size, d))

    pair_list: list[tuple[int, int]] = []
    for sent in sentences:
        _sentence_pairs([vocab[t] for t in sent], bag, config.window, pair_list)
    if pair_list:
        pairs = np.array(pair_list, dtype=np.int64)
        # Unigram^0.75 negative-sampling distribution.
        freq = np.array([counts[t] for t in vocab_list], dtype=np.float64) ** 0.75
        neg_cum = np.cumsum(freq / freq.sum())
        k, lr = config.negatives, config.lr
        for _ in range(config.epochs):
            order = rng.permutation(len(pairs))
            for start in range(0, len(order), config.batch_size):
                sel = pairs[order[start : start + config.batch_size]]
                centers, contexts = sel[:, 0], sel[:, 1]
                negs = np.searchsorted(neg_cum, rng.random_sample((len(sel), k)))
                negs = np.minimum(negs, v_size - 1)
                wc = w_in[centers]
                co = w_out[contexts]
                cn = w_out[negs]
                s_pos = np.clip(np.einsum("bd,bd->b", wc, co), -30.0, 30.0)
                s_neg = np.clip(np.einsum("bd,bkd->bk", wc, cn), -30.0, 30.0)
                g_pos = 1.0 / (1.0 + np.exp(-s_pos)) - 1.0
                g_neg = 1.0 / (1.0 + np.exp(-s_neg))
                grad_wc = g_pos[:, None] * co + np.einsum("bk,bkd->bd", g_neg, cn)
                # Each vector takes the mean gradient over the pairs touching
                # it in this batch; summing instead multiplies the step of a
                # frequent token by its batch count and diverges.
                delta_in = np.zeros_like(w_in)
                cnt_in = np.zeros(v_size)
                np.add.at(delta_in, centers, grad_wc)
                np.add.at(cnt_in, centers, 1.0)
                hit = cnt_in > 0
                w_in[hit] -= lr * delta_in[hit] / cnt_in[hit, None]
                delta_out = np.zeros_like(w_out)
                cnt_out = np.zeros(v_size)
                np.add.at(delta_out, contexts, g_pos[:, None] * wc)
                np.add.at(cnt_out, contexts, 1.0)
                flat_negs = negs.ravel()
                np.add.at(delta_out, flat_negs, (g_neg[..., None] * wc[:, None, :]).reshape(-1, d))
                np.add.at(cnt_out, flat_negs, 1.0)
                hit = cnt_out > 0
                w_out[hit] -= lr * delta_out[hit] / cnt_out[hit, None]

    bucket_sum = np.zeros((config.buckets, d))
    bucket_n = np.zeros(config.buckets)
    for tok, idx in vocab.items():
        for b in subword_ids(tok, config.buckets):
            bucket_sum[b] += w_in[idx]
            bucket_n[b] += 1
    filled = bucket_n > 0
    bucket_vectors = bucket_sum / np.maximum(bucket_n, 1.0)[:, None]
    return EmbeddingModel(granularity, vocab, w_in, bucket_vectors, filled)


def tokenize(value: str) -> list[str]:
    return value.split()


def corpus_for(dataset: Dataset, granularity: str) -> tuple[list[list[str]], bool]:
    """Sentences and bag/window mode for one granularity."""
    if granularity == "character":
        return [list(v) for row in dataset.rows for v in row if v], False
    if granularity == "cell-token":
        return [tokenize(v) for row in dataset.rows for v in row if v.strip()], False
    if granularity == "tuple-bag":
        return [[t for v in row for t in tokenize(v)] for row in dataset.rows], True
    if granularity == "dataset-neighbor":
        return [list(row) for row in dataset.rows], True
    raise DataError(f"unknown granularity {granularity!r}")


def fit_embeddings(dataset: Dataset, config: EmbeddingConfig | None = None) -> dict[str, EmbeddingModel]:
    """Train all four granularity models on one dataset."""
    if dataset.n_rows == 0:
        raise DataError("cannot fit embeddings on an empty dataset")
    config = config or EmbeddingConfig()
    models = {}
    for offset, granularity in enumerate(GRANULARITIES):
        sentences, bag = corpus_for(dataset, granularity)
        sub_config = EmbeddingConfig(
            dims=config.dims,
            epochs=config.epochs,
            window=config.window,
            negatives=config.negatives,
            lr=config.lr,
            batch_size=config.batch_size,
            buckets=config.buckets,
            seed=config.seed + offset,
        )
        try:
            models[granularity] = train_sgns(sentences, bag, sub_config, granularity)
        except DataError:
            # All-whitespace values leave the token-level corpora empty, but
            # downstream featurization needs a model for every granularity.
            if granularity == "cell-token":
                warnings.warn("cell-token corpus is empty; using character corpus tokens")
                sentences, bag = corpus_for(dataset, "character")
            elif granularity == "tuple-bag":
                warnings.warn("tuple-bag corpus is empty; using whole-value tokens")
                sentences, bag = corpus_for(dataset, "dataset-neighbor")
            else:
                raise
            models[granularity] = train_sgns(sentences, bag, sub_config, granularity)
    return models
