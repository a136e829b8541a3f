"""Representation models and feature assembly for cell classification.

A fitted FeaturePipeline turns any cell of its dataset into:

- a wide vector, fixed layout:
  [0]     least-frequent raw 3-gram probability of the value
  [1]     least-frequent symbolic 3-gram probability (classes C/N/S)
  [2]     empirical frequency of the value in its attribute
  [3:3+N]       one-hot column id
  [3+N:2N+2]    co-occurrence P(value | co-located value), other attributes in
                index order
  [2N+2:2N+2+S] per-constraint violation counts of the cell's tuple
  [last]  cosine distance to the nearest other distinct value in the attribute
  (total 3 + N + (N-1) + S + 1 for N attributes and S constraints)

- four 50-d deep inputs, one per embedding granularity: mean character
  vector, mean cell-token vector, mean tuple-bag token vector, and the whole
  value's dataset-neighbor vector.

A value override lets augmentation featurize a synthetic dirty value inside
the original tuple context; the violation block is then recomputed for the
modified tuple against the rest of the dataset.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .constraints import DenialConstraint, ViolationIndex
from .data import CellRef, DataError, Dataset
from .embeddings import (
    GRANULARITIES,
    EmbeddingConfig,
    EmbeddingModel,
    cosine_similarity,
    fit_embeddings,
    tokenize,
)

RAW_ALPHABET_SIZE = 128  # ASCII
SYMBOLIC_ALPHABET = ("C", "N", "S", "^", "$")


def symbolic_form(value: str) -> str:
    """Map each character to its class: C letter, N digit, S anything else."""
    return "".join("N" if ch.isdigit() else "C" if ch.isalpha() else "S" for ch in value)


def ngrams(value: str, n: int = 3) -> list[str]:
    """n-grams of the sentinel-padded value; empty value gives none."""
    if not value:
        return []
    padded = "^" + value + "$"
    if len(padded) < n:
        return [padded]
    return [padded[i : i + n] for i in range(len(padded) - n + 1)]


@dataclass
class NGramFormatModel:
    """Laplace-smoothed 3-gram distribution for one attribute and alphabet."""

    counts: dict[str, int]
    total: int
    alphabet_size: int  # full 3-gram space = alphabet_size ** 3

    @property
    def floor(self) -> float:
        return 1.0 / (self.total + self.alphabet_size**3)

    def prob(self, gram: str) -> float:
        return (self.counts.get(gram, 0) + 1) / (self.total + self.alphabet_size**3)

    def score(self, value: str) -> float:
        """Smoothed probability of the value's rarest 3-gram."""
        grams = ngrams(value)
        if not grams:
            return self.floor
        return min(self.prob(g) for g in grams)

    def score_replaced(self, new_grams: list[str], old_grams: list[str]) -> float:
        """score() as if the fitted corpus swapped old_grams for new_grams.

        Scores a hypothetical cell assignment on the same footing as an
        actual one: a value's own grams count toward its probability, so a
        synthetic corruption is not separable from a real one merely by
        being absent from the corpus.
        """
        new_counts = Counter(new_grams)
        old_counts = Counter(old_grams)
        total = max(self.total + len(new_grams) - len(old_grams), 0)
        denom = total + self.alphabet_size**3
        if not new_grams:
            return 1.0 / denom
        return min(
            (max(self.counts.get(g, 0) + new_counts[g] - old_counts[g], 0) + 1) / denom
            for g in new_counts
        )


def fit_format_models(dataset: Dataset) -> list[dict[str, NGramFormatModel]]:
    """Per attribute: {'raw': model over ASCII, 'symbolic': model over C/N/S}."""
    out = []
    for j in range(dataset.n_attributes):
        raw_counts: dict[str, int] = {}
        sym_counts: dict[str, int] = {}
        raw_total = sym_total = 0
        for value in dataset.column(j):
            for g in ngrams(value):
                raw_counts[g] = raw_counts.get(g, 0) + 1
                raw_total += 1
            for g in ngrams(symbolic_form(value)):
                sym_counts[g] = sym_counts.get(g, 0) + 1
                sym_total += 1
        out.append(
            {
                "raw": NGramFormatModel(raw_counts, raw_total, RAW_ALPHABET_SIZE),
                "symbolic": NGramFormatModel(sym_counts, sym_total, len(SYMBOLIC_ALPHABET)),
            }
        )
    return out


def fit_value_frequencies(dataset: Dataset) -> list[dict[str, float]]:
    out = []
    for j in range(dataset.n_attributes):
        column = dataset.column(j)
        freq: dict[str, float] = {}
        for v in column:
            freq[v] = freq.get(v, 0.0) + 1.0
        out.append({v: c / len(column) for v, c in freq.items()})
    return out


def fit_cooccurrence(dataset: Dataset) -> dict[tuple[int, int], dict[tuple[str, str], float]]:
    """P(value of A_i | value of A_j) for every ordered attribute pair (i, j)."""
    n_attrs = dataset.n_attributes
    marginals: list[dict[str, int]] = []
    for j in range(n_attrs):
        counts: dict[str, int] = {}
        for v in dataset.column(j):
            counts[v] = counts.get(v, 0) + 1
        marginals.append(counts)
    out: dict[tuple[int, int], dict[tuple[str, str], float]] = {}
    for i in range(n_attrs):
        for j in range(n_attrs):
            if i == j:
                continue
            joint: dict[tuple[str, str], int] = {}
            for row in dataset.rows:
                key = (row[i], row[j])
                joint[key] = joint.get(key, 0) + 1
            out[(i, j)] = {k: c / marginals[j][k[1]] for k, c in joint.items()}
    return out


@dataclass(frozen=True)
class FeatureVector:
    wide: np.ndarray  # (wide_dim,)
    deep: np.ndarray  # (4, dims)


@dataclass
class FeaturePipeline:
    """All fitted representation models bound to one dataset."""

    dataset: Dataset
    constraints: list[DenialConstraint]
    format_models: list[dict[str, NGramFormatModel]]
    value_freqs: list[dict[str, float]]
    cooccurrence: dict[tuple[int, int], dict[tuple[str, str], float]]
    embeddings: dict[str, EmbeddingModel]
    violation_index: ViolationIndex = field(repr=False)
    violation_counts: np.ndarray = field(repr=False)
    fit_n_rows: int = 0  # row count of the dataset the statistics were fitted on
    _neighbor_cache: list[dict[str, float]] = field(default_factory=list, repr=False)
    _attr_value_vectors: list[tuple[list[str], np.ndarray]] = field(default_factory=list, repr=False)
    _char_cache: dict = field(default_factory=dict, repr=False)
    _token_cache: dict = field(default_factory=dict, repr=False)
    _neighbor_vec_cache: dict = field(default_factory=dict, repr=False)
    _tuple_bag_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def fit(
        cls,
        dataset: Dataset,
        constraints: list[DenialConstraint] | None = None,
        embed_config: EmbeddingConfig | None = None,
    ) -> "FeaturePipeline":
        constraints = list(constraints or [])
        index = ViolationIndex(dataset, constraints)
        pipeline = cls(
            dataset=dataset,
            constraints=constraints,
            format_models=fit_format_models(dataset),
            value_freqs=fit_value_frequencies(dataset),
            cooccurrence=fit_cooccurrence(dataset),
            embeddings=fit_embeddings(dataset, embed_config),
            violation_index=index,
            violation_counts=index.counts(),
            fit_n_rows=dataset.n_rows,
        )
        pipeline._build_neighbor_tables()
        return pipeline

    def rebind(self, dataset: Dataset):
        """Point the pipeline at another dataset with the same schema.

        Learned statistics (format models, frequencies, co-occurrence,
        embeddings) stay fixed; dataset-bound state (violation index, tuple
        and neighborhood caches) is rebuilt for the new rows.
        """
        if dataset.schema.attributes != self.dataset.schema.attributes:
            raise DataError(
                f"dataset schema {dataset.schema.attributes} does not match "
                f"fitted schema {self.dataset.schema.attributes}"
            )
        self.dataset = dataset
        self.violation_index = ViolationIndex(dataset, self.constraints)
        self.violation_counts = self.violation_index.counts()
        self._tuple_bag_cache = {}
        self._build_neighbor_tables()

    # -- layout ------------------------------------------------------------

    @property
    def n_attrs(self) -> int:
        return self.dataset.n_attributes

    @property
    def wide_dim(self) -> int:
        return 3 + self.n_attrs + (self.n_attrs - 1) + len(self.constraints) + 1

    @property
    def dims(self) -> int:
        return self.embeddings["character"].dims

    def wide_blocks(self) -> list[tuple[str, slice]]:
        """Named column ranges of the wide vector, in order."""
        n, s = self.n_attrs, len(self.constraints)
        return [
            ("raw-3gram", slice(0, 1)),
            ("symbolic-3gram", slice(1, 2)),
            ("value-frequency", slice(2, 3)),
            ("column-id", slice(3, 3 + n)),
            ("cooccurrence", slice(3 + n, 2 * n + 2)),
            ("violations", slice(2 * n + 2, 2 * n + 2 + s)),
            ("neighbor-distance", slice(2 * n + 2 + s, 2 * n + 3 + s)),
        ]

    def layout_hash(self) -> str:
        spec = json.dumps(
            {
                "attributes": list(self.dataset.schema.attributes),
                "n_constraints": len(self.constraints),
                "wide_dim": self.wide_dim,
                "dims": self.dims,
                "granularities": list(GRANULARITIES),
            },
            sort_keys=True,
        )
        return hashlib.sha256(spec.encode("utf-8")).hexdigest()[:16]

    # -- neighborhood ------------------------------------------------------

    def _build_neighbor_tables(self):
        """Nearest-other-value cosine distance per distinct in-corpus value."""
        model = self.embeddings["dataset-neighbor"]
        self._neighbor_cache = []
        self._attr_value_vectors = []
        for j in range(self.n_attrs):
            values = sorted(set(self.dataset.column(j)))
            mat = np.stack([model.vector(v) for v in values]) if values else np.zeros((0, model.dims))
            norms = np.linalg.norm(mat, axis=1)
            safe = np.where(norms == 0.0, 1.0, norms)
            unit = mat / safe[:, None]
            unit[norms == 0.0] = 0.0
            self._attr_value_vectors.append((values, unit))
            cache: dict[str, float] = {}
            if len(values) == 1:
                cache[values[0]] = 0.0
            elif len(values) > 1:
                sims = unit @ unit.T
                np.fill_diagonal(sims, -np.inf)
                best = sims.max(axis=1)
                for idx, v in enumerate(values):
                    cache[v] = float(1.0 - best[idx])
            self._neighbor_cache.append(cache)

    def neighborhood_distance(self, attr_index: int, value: str) -> float:
        """Cosine distance to the nearest other distinct value of the attribute."""
        cache = self._neighbor_cache[attr_index]
        hit = cache.get(value)
        if hit is not None:
            return hit
        values, unit = self._attr_value_vectors[attr_index]
        if len(values) == 0:
            return 0.0
        vec = self.embeddings["dataset-neighbor"].vector(value)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            distance = 1.0
        else:
            sims = unit @ (vec / norm)
            distance = float(1.0 - sims.max())
        cache[value] = distance
        return distance

    # -- deep inputs ---------------------------------------------------------

    def _char_vector(self, value: str) -> np.ndarray:
        hit = self._char_cache.get(value)
        if hit is None:
            hit = self.embeddings["character"].mean_vector(list(value))
            self._char_cache[value] = hit
        return hit

    def _token_vector(self, value: str) -> np.ndarray:
        hit = self._token_cache.get(value)
        if hit is None:
            hit = self.embeddings["cell-token"].mean_vector(tokenize(value))
            self._token_cache[value] = hit
        return hit

    def _neighbor_vector(self, value: str) -> np.ndarray:
        hit = self._neighbor_vec_cache.get(value)
        if hit is None:
            hit = self.embeddings["dataset-neighbor"].vector(value)
            self._neighbor_vec_cache[value] = hit
        return hit

    def _tuple_bag_vector(self, tuple_index: int, row: tuple[str, ...], modified: bool) -> np.ndarray:
        if not modified:
            hit = self._tuple_bag_cache.get(tuple_index)
            if hit is not None:
                return hit
        vec = self.embeddings["tuple-bag"].mean_vector([t for v in row for t in tokenize(v)])
        if not modified:
            self._tuple_bag_cache[tuple_index] = vec
        return vec

    # -- featurization -------------------------------------------------------

    def featurize(self, cell: CellRef, override_value: str | None = None) -> FeatureVector:
        """FeatureVector for one cell; override substitutes a synthetic value.

        An override is scored counterfactually, against the dataset as if the
        cell held that value: its grams, its one occurrence, and its value
        pairs all count, exactly as they would had the corruption been real.
        """
        t, i = cell
        if not (0 <= t < self.dataset.n_rows and 0 <= i < self.n_attrs):
            raise DataError(f"cell {cell} outside fitted dataset")
        row = self.dataset.rows[t]
        original = row[i]
        value = original if override_value is None else override_value
        modified = override_value is not None and override_value != original
        if modified:
            row = row[:i] + (value,) + row[i + 1 :]

        n = self.n_attrs
        wide = np.zeros(self.wide_dim)
        if modified:
            wide[0] = self.format_models[i]["raw"].score_replaced(ngrams(value), ngrams(original))
            wide[1] = self.format_models[i]["symbolic"].score_replaced(
                ngrams(symbolic_form(value)), ngrams(symbolic_form(original))
            )
            wide[2] = self.value_freqs[i].get(value, 0.0) + 1.0 / max(self.fit_n_rows, 1)
        else:
            wide[0] = self.format_models[i]["raw"].score(value)
            wide[1] = self.format_models[i]["symbolic"].score(symbolic_form(value))
            wide[2] = self.value_freqs[i].get(value, 0.0)
        wide[3 + i] = 1.0
        pos = 3 + n
        for j in range(n):
            if j == i:
                continue
            cooc = self.cooccurrence[(i, j)].get((value, row[j]), 0.0)
            if modified:
                context_count = round(self.value_freqs[j].get(row[j], 0.0) * self.fit_n_rows)
                if context_count > 0:
                    cooc += 1.0 / context_count
            wide[pos] = cooc
            pos += 1
        if self.constraints:
            if modified:
                viol = self.violation_index.counts_for_row(row, exclude_index=t)
            else:
                viol = self.violation_counts[t]
            wide[pos : pos + len(self.constraints)] = viol
        wide[-1] = self.neighborhood_distance(i, value)

        deep = np.stack(
            [
                self._char_vector(value),
                self._token_vector(value),
                self._tuple_bag_vector(t, row, modified),
                self._neighbor_vector(value),
            ]
        )
        return FeatureVector(wide, deep)

    def featurize_many(
        self, cells: list[CellRef], overrides: dict[int, str] | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Stacked features: wide (n, wide_dim) and deep (4, n, dims).

        overrides maps positions in `cells` to substitute values.
        """
        wide = np.zeros((len(cells), self.wide_dim))
        deep = np.zeros((4, len(cells), self.dims))
        for k, cell in enumerate(cells):
            override = overrides.get(k) if overrides else None
            fv = self.featurize(cell, override)
            wide[k] = fv.wide
            deep[:, k, :] = fv.deep
        return wide, deep
