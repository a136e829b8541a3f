"""Noisy-channel error model: learned string transformations and policy.

The channel is a pair H = (Phi, Pi): a set of string rewrites lhs |-> rhs and
a probability distribution over them. Both are learned from labeled pairs of
(clean value, corrupted value). Given the channel, correct training cells can
be corrupted on purpose to synthesize error-labeled examples and offset class
imbalance.

Transformations are extracted by a recursive diff: emit the whole pair, split
both strings around their longest common substring, match the left/right
fragments by whichever assignment (straight or crossed) has the higher
combined similarity, then recurse on the matched fragments. Identity rewrites
are dropped; duplicates are kept because the policy is an occurrence-count
distribution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .data import CellRef, DataError, Dataset, LabeledCell, TrainingSet


class Transformation(NamedTuple):
    lhs: str
    rhs: str

    @property
    def template(self) -> str:
        """'add' inserts rhs, 'remove' deletes lhs, 'exchange' rewrites lhs."""
        if not self.lhs:
            return "add"
        if not self.rhs:
            return "remove"
        return "exchange"

    def __repr__(self):
        return f"{self.lhs or '∅'}↦{self.rhs or '∅'}"


class LabeledPair(NamedTuple):
    clean: str
    dirty: str


def similarity(s1: str, s2: str) -> float:
    """Ratcliff-Obershelp ratio 2C/S; 1.0 when both strings are empty."""
    # SequenceMatcher.ratio computes exactly 2C/S over recursively matched
    # longest common blocks, and returns 1.0 for two empty strings.
    return SequenceMatcher(a=s1, b=s2, autojunk=False).ratio()


def _longest_common_substring(s1: str, s2: str):
    """(start1, start2, size) of the leftmost-in-s1 longest common substring."""
    m = SequenceMatcher(a=s1, b=s2, autojunk=False).find_longest_match(0, len(s1), 0, len(s2))
    return m.a, m.b, m.size


def learn_transformations(clean: str, dirty: str) -> list[Transformation]:
    """Extract rewrite rules turning `clean` into `dirty`, most global first.

    Duplicates are intentional; each occurrence weights the empirical policy.
    Identity rewrites never appear. Equal inputs yield an empty list.
    """
    if clean == dirty:
        return []
    out = [Transformation(clean, dirty)]
    a, b, size = _longest_common_substring(clean, dirty)
    if size == 0:
        return out
    left, right = clean[:a], clean[a + size:]
    dleft, dright = dirty[:b], dirty[b + size:]
    straight = similarity(left, dleft) + similarity(right, dright)
    crossed = similarity(left, dright) + similarity(right, dleft)
    # Ties go to the crossed pairing: the straight branch requires strictly
    # higher combined similarity.
    if straight > crossed:
        pairs = [(left, dleft), (right, dright)]
    else:
        pairs = [(left, dright), (right, dleft)]
    for frag_clean, frag_dirty in pairs:
        if frag_clean != frag_dirty:
            out.append(Transformation(frag_clean, frag_dirty))
            out.extend(learn_transformations(frag_clean, frag_dirty))
    return out


def build_phi(pairs: Iterable[LabeledPair]):
    """All transformation lists plus their deduplicated union.

    Returns (phi, lists): phi is a sorted tuple of distinct transformations,
    lists holds one per-pair list with multiplicity preserved.
    """
    lists = [learn_transformations(p.clean, p.dirty) for p in pairs]
    distinct = sorted({t for lst in lists for t in lst})
    if not distinct:
        warnings.warn("no transformations learned: empty or identical pairs")
    return tuple(distinct), lists


@dataclass(frozen=True)
class EmpiricalPolicy:
    """Occurrence-count distribution p(phi) = c_phi / c over learned rewrites."""

    transformations: tuple[Transformation, ...]
    probs: np.ndarray
    counts: np.ndarray

    def top(self, k: int = 10) -> list[tuple[Transformation, float]]:
        order = sorted(
            range(len(self.transformations)),
            key=lambda i: (-self.probs[i], self.transformations[i]),
        )
        return [(self.transformations[i], float(self.probs[i])) for i in order[:k]]


def empirical_policy(lists: Sequence[Sequence[Transformation]]) -> EmpiricalPolicy:
    """Count every list element; normalize by the total element count."""
    counts: dict[Transformation, int] = {}
    total = 0
    for lst in lists:
        for t in lst:
            counts[t] = counts.get(t, 0) + 1
            total += 1
    if total == 0:
        raise DataError("cannot build a policy from zero transformations")
    ordered = sorted(counts)
    c = np.array([counts[t] for t in ordered], dtype=np.int64)
    return EmpiricalPolicy(tuple(ordered), c / total, c)


@dataclass(frozen=True)
class ConditionalPolicy:
    """Policy restricted to rewrites applicable to one value, renormalized."""

    transformations: tuple[Transformation, ...]
    probs: np.ndarray
    _cum: np.ndarray

    @property
    def is_empty(self) -> bool:
        return len(self.transformations) == 0

    def sample(self, rng: np.random.RandomState) -> Transformation:
        if self.is_empty:
            raise DataError("cannot sample from an empty conditional policy")
        i = int(np.searchsorted(self._cum, rng.random_sample(), side="right"))
        return self.transformations[min(i, len(self.transformations) - 1)]

    def top(self, k: int = 10) -> list[tuple[Transformation, float]]:
        order = sorted(
            range(len(self.transformations)),
            key=lambda i: (-self.probs[i], self.transformations[i]),
        )
        return [(self.transformations[i], float(self.probs[i])) for i in order[:k]]


_EMPTY_CONDITIONAL = ConditionalPolicy((), np.zeros(0), np.zeros(0))


def conditional_policy(policy: EmpiricalPolicy, value: str) -> ConditionalPolicy:
    """Restrict to rewrites whose lhs occurs in `value`; empty lhs always does."""
    keep = [i for i, t in enumerate(policy.transformations) if t.lhs in value]
    if not keep:
        return _EMPTY_CONDITIONAL
    mass = policy.probs[keep]
    probs = mass / mass.sum()
    return ConditionalPolicy(
        tuple(policy.transformations[i] for i in keep), probs, np.cumsum(probs)
    )


def apply(transformation: Transformation, value: str, rng: np.random.RandomState) -> str:
    """Apply a rewrite once at a uniformly chosen occurrence or position."""
    lhs, rhs = transformation
    if not lhs:
        # Insertion: |value| + 1 possible positions.
        pos = int(rng.randint(len(value) + 1))
        return value[:pos] + rhs + value[pos:]
    starts = [i for i in range(len(value) - len(lhs) + 1) if value.startswith(lhs, i)]
    if not starts:
        raise DataError(f"{lhs!r} is not a substring of {value!r}")
    start = starts[int(rng.randint(len(starts)))]
    return value[:start] + rhs + value[start + len(lhs):]


@dataclass
class NoisyChannel:
    """Learned corruption model: transformation set plus empirical policy."""

    phi: tuple[Transformation, ...]
    policy: EmpiricalPolicy
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def learn(cls, pairs: Iterable[LabeledPair]) -> "NoisyChannel":
        phi, lists = build_phi(pairs)
        return cls(phi, empirical_policy(lists))

    def conditional(self, value: str) -> ConditionalPolicy:
        cond = self._cache.get(value)
        if cond is None:
            cond = conditional_policy(self.policy, value)
            self._cache[value] = cond
        return cond

    def corrupt(self, value: str, rng: np.random.RandomState) -> str | None:
        """One policy-sampled corruption of `value`, or None when nothing applies."""
        cond = self.conditional(value)
        if cond.is_empty:
            return None
        return apply(cond.sample(rng), value, rng)


@dataclass(frozen=True)
class AugConfig:
    """Augmentation knobs.

    alpha is the coin probability of corrupting a drawn example; balance is
    the target fraction of error examples in the final training set (0.5
    reproduces the stop rule |T_H| = p - n). The iteration cap guards against
    small alpha or mostly-empty policies.
    """

    alpha: float = 1.0
    seed: int = 0
    balance: float = 0.5
    max_iter_factor: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DataError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.balance < 1.0:
            raise DataError(f"balance must be in (0, 1), got {self.balance}")


def synthetic_error_target(n_correct: int, n_errors: int, balance: float) -> int:
    """How many synthetic errors bring the error fraction up to `balance`."""
    total = n_correct + n_errors
    need = (balance * total - n_errors) / (1.0 - balance)
    return max(0, int(np.ceil(need - 1e-9)))


def augment(train: TrainingSet, channel: NoisyChannel, config: AugConfig) -> list[LabeledCell]:
    """Synthesize error-labeled examples from correct ones via the channel.

    Each output keeps its source cell reference so it is featurized inside the
    original tuple context, with the synthetic dirty value standing in for the
    cell value. Deterministic given config.seed.
    """
    correct = train.correct()
    target = synthetic_error_target(len(correct), train.n_errors, config.balance)
    if target == 0:
        if len(correct) <= train.n_errors:
            warnings.warn("training set already balanced or error-dominated; nothing to augment")
        return []
    rng = np.random.RandomState(config.seed & 0xFFFFFFFF)
    out: list[LabeledCell] = []
    max_iters = config.max_iter_factor * target
    iters = 0
    while len(out) < target and iters < max_iters:
        iters += 1
        example = correct[int(rng.randint(len(correct)))]
        if rng.random_sample() >= config.alpha:
            continue
        dirty = channel.corrupt(example.observed, rng)
        if dirty is None:
            continue
        out.append(LabeledCell(example.cell, observed=dirty, truth=example.observed))
    if len(out) < target:
        warnings.warn(
            f"augmentation stopped at {len(out)}/{target} examples after {iters} iterations"
        )
    return out


def weak_label_cells(
    dataset: Dataset, threshold: float = 0.9
) -> list[tuple[CellRef, LabeledPair]]:
    """High-precision repair suggestions from a naive Bayes imputation model.

    For each cell, the observed value is hidden and every value seen in the
    same attribute is scored as a candidate repair u by
    P(u) * prod_j P(t[A_j] | u) with Laplace-smoothed co-occurrence counts.
    A pair (repair, observed) is emitted only when the top candidate differs
    from the observed value and its normalized posterior strictly exceeds the
    threshold.
    """
    if dataset.n_attributes < 2:
        raise DataError("weak labeling needs at least 2 attributes")
    n = dataset.n_rows
    n_attrs = dataset.n_attributes
    vocabs: list[list[str]] = []
    codes: list[np.ndarray] = []
    for j in range(n_attrs):
        column = dataset.column(j)
        vocab = sorted(set(column))
        index = {v: i for i, v in enumerate(vocab)}
        vocabs.append(vocab)
        codes.append(np.array([index[v] for v in column], dtype=np.int64))
    value_counts = [np.bincount(codes[j], minlength=len(vocabs[j])) for j in range(n_attrs)]

    out: list[tuple[CellRef, LabeledPair]] = []
    for i in range(n_attrs):
        v_i = len(vocabs[i])
        scores = np.tile(np.log(value_counts[i] / n), (n, 1))
        for j in range(n_attrs):
            if j == i:
                continue
            v_j = len(vocabs[j])
            cooc = np.zeros((v_i, v_j), dtype=np.float64)
            np.add.at(cooc, (codes[i], codes[j]), 1.0)
            log_cond = np.log(cooc + 1.0) - np.log(
                value_counts[i].astype(np.float64) + v_j
            )[:, None]
            scores += log_cond[:, codes[j]].T
        scores -= scores.max(axis=1, keepdims=True)
        posterior = np.exp(scores)
        posterior /= posterior.sum(axis=1, keepdims=True)
        best = np.argmax(posterior, axis=1)
        for t in range(n):
            u = int(best[t])
            if u != codes[i][t] and posterior[t, u] > threshold:
                observed = dataset.rows[t][i]
                out.append((CellRef(t, i), LabeledPair(clean=vocabs[i][u], dirty=observed)))
    return out


def weak_label_pairs(dataset: Dataset, threshold: float = 0.9) -> list[LabeledPair]:
    """Just the (clean, dirty) pairs from weak_label_cells."""
    return [pair for _, pair in weak_label_cells(dataset, threshold)]
