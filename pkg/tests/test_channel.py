import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotcheck.channel import (
    AugConfig,
    LabeledPair,
    NoisyChannel,
    Transformation,
    apply,
    augment,
    build_phi,
    conditional_policy,
    empirical_policy,
    learn_transformations,
    similarity,
    synthetic_error_target,
    weak_label_cells,
    weak_label_pairs,
)
from spotcheck.data import CellRef, DataError, Dataset, LabeledCell, Schema, TrainingSet

T = Transformation


# -- independent Ratcliff-Obershelp oracle: recursive leftmost-longest blocks --


def _oracle_longest(s1, lo1, hi1, s2, lo2, hi2):
    best_i, best_j, best_k = lo1, lo2, 0
    for i in range(lo1, hi1):
        for j in range(lo2, hi2):
            k = 0
            while i + k < hi1 and j + k < hi2 and s1[i + k] == s2[j + k]:
                k += 1
            if k > best_k:  # ties keep the earliest (i, j)
                best_i, best_j, best_k = i, j, k
    return best_i, best_j, best_k


def _oracle_match_size(s1, lo1, hi1, s2, lo2, hi2):
    i, j, k = _oracle_longest(s1, lo1, hi1, s2, lo2, hi2)
    if k == 0:
        return 0
    return (
        k
        + _oracle_match_size(s1, lo1, i, s2, lo2, j)
        + _oracle_match_size(s1, i + k, hi1, s2, j + k, hi2)
    )


def oracle_ratio(s1, s2):
    total = len(s1) + len(s2)
    if total == 0:
        return 1.0
    return 2.0 * _oracle_match_size(s1, 0, len(s1), s2, 0, len(s2)) / total


class TestSimilarity:
    def test_identical(self):
        assert similarity("abc", "abc") == 1.0

    def test_both_empty(self):
        assert similarity("", "") == 1.0

    def test_disjoint(self):
        assert similarity("abc", "xyz") == 0.0

    def test_hand_value(self):
        # blocks: "ab" matches; 2*2 / 6
        assert similarity("abc", "abd") == pytest.approx(4 / 6)

    @given(st.text(alphabet="abx", max_size=8), st.text(alphabet="abx", max_size=8))
    @settings(max_examples=300, deadline=None)
    def test_matches_recursive_block_oracle(self, s1, s2):
        assert similarity(s1, s2) == oracle_ratio(s1, s2)


class TestLearnTransformations:
    def test_numeric_example_full_trace(self):
        got = learn_transformations("60612", "6061x2")
        assert got == [T("60612", "6061x2"), T("2", "x2"), T("2", "x2"), T("", "x"), T("", "x")]

    def test_word_example_full_trace(self):
        got = learn_transformations("Madison", "Madixson")
        assert got == [
            T("Madison", "Madixson"),
            T("son", "xson"),
            T("son", "xson"),
            T("", "x"),
            T("", "x"),
        ]

    def test_identical_pair_yields_nothing(self):
        assert learn_transformations("same", "same") == []

    def test_no_common_substring_stops_at_full_pair(self):
        assert learn_transformations("abc", "xyz") == [T("abc", "xyz")]

    def test_pure_insertion_from_empty(self):
        assert learn_transformations("", "x") == [T("", "x")]

    def test_pure_deletion_to_empty(self):
        assert learn_transformations("x", "") == [T("x", "")]

    @given(st.text(alphabet="abx", max_size=6), st.text(alphabet="abx", max_size=6))
    @settings(max_examples=200, deadline=None)
    def test_no_identity_rewrites_and_full_pair_first(self, clean, dirty):
        got = learn_transformations(clean, dirty)
        if clean == dirty:
            assert got == []
        else:
            assert got[0] == T(clean, dirty)
            assert all(t.lhs != t.rhs for t in got)


class TestTemplates:
    def test_template_classification(self):
        assert T("", "x").template == "add"
        assert T("x", "").template == "remove"
        assert T("a", "b").template == "exchange"

    def test_repr_uses_empty_set_symbol(self):
        assert repr(T("", "x")) == "∅↦x"
        assert repr(T("a", "")) == "a↦∅"


class TestPolicies:
    def test_single_pair_probabilities(self):
        phi, lists = build_phi([LabeledPair("a", "ax")])
        policy = empirical_policy(lists)
        # trace: [a->ax, 0->x, 0->x]; counts 1 and 2 over 3 elements
        table = dict(zip(policy.transformations, policy.probs))
        assert table[T("a", "ax")] == pytest.approx(1 / 3)
        assert table[T("", "x")] == pytest.approx(2 / 3)

    def test_phi_is_sorted_and_deduplicated(self):
        phi, _ = build_phi([LabeledPair("a", "ax"), LabeledPair("b", "bx")])
        assert phi == tuple(sorted(set(phi)))
        assert T("", "x") in phi

    def test_identical_pairs_warn_and_empty(self):
        with pytest.warns(UserWarning, match="no transformations"):
            phi, lists = build_phi([LabeledPair("a", "a")])
        assert phi == ()
        with pytest.raises(DataError):
            empirical_policy(lists)

    def test_probabilities_sum_to_one(self):
        _, lists = build_phi(
            [LabeledPair("60612", "6061x2"), LabeledPair("Madison", "Madixson")]
        )
        policy = empirical_policy(lists)
        assert policy.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert policy.counts.sum() == 10  # two 5-element traces

    def test_conditional_filters_by_substring(self):
        _, lists = build_phi([LabeledPair("son", "xson"), LabeledPair("12", "1x2")])
        policy = empirical_policy(lists)
        cond = conditional_policy(policy, "johnson")
        kept = set(cond.transformations)
        assert T("son", "xson") in kept
        assert all(t.lhs in "johnson" for t in kept)
        assert cond.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_conditional_empty_lhs_always_applies(self):
        _, lists = build_phi([LabeledPair("a", "ax")])
        policy = empirical_policy(lists)
        cond = conditional_policy(policy, "zzz")  # no 'a' anywhere
        assert set(cond.transformations) == {T("", "x")}
        assert cond.probs[0] == pytest.approx(1.0)

    def test_conditional_no_match_is_empty(self):
        policy = empirical_policy([[T("q", "z")]])
        cond = conditional_policy(policy, "abc")
        assert cond.is_empty
        with pytest.raises(DataError):
            cond.sample(np.random.RandomState(0))

    def test_top_orders_by_probability(self):
        _, lists = build_phi([LabeledPair("a", "ax")])
        policy = empirical_policy(lists)
        top = policy.top(5)
        assert top[0][0] == T("", "x")
        assert top[0][1] >= top[-1][1]


class TestApply:
    def test_exchange_at_unique_occurrence(self):
        rng = np.random.RandomState(0)
        assert apply(T("b", "q"), "abc", rng) == "aqc"

    def test_missing_lhs_raises(self):
        with pytest.raises(DataError, match="not a substring"):
            apply(T("z", "q"), "abc", np.random.RandomState(0))

    def test_insertion_positions_uniform(self):
        rng = np.random.RandomState(7)
        outcomes = {}
        for _ in range(9000):
            out = apply(T("", "x"), "ab", rng)
            outcomes[out] = outcomes.get(out, 0) + 1
        # 3 positions: xab, axb, abx; binomial(9000, 1/3) within 4 sigma
        sigma = (9000 * (1 / 3) * (2 / 3)) ** 0.5
        assert set(outcomes) == {"xab", "axb", "abx"}
        for count in outcomes.values():
            assert abs(count - 3000) < 4 * sigma

    def test_overlapping_occurrences_uniform(self):
        rng = np.random.RandomState(3)
        outcomes = {}
        for _ in range(6000):
            out = apply(T("aa", "b"), "aaa", rng)
            outcomes[out] = outcomes.get(out, 0) + 1
        # starts 0 and 1: "ba" and "ab"
        sigma = (6000 * 0.25) ** 0.5
        assert set(outcomes) == {"ba", "ab"}
        for count in outcomes.values():
            assert abs(count - 3000) < 4 * sigma

    @given(
        st.text(alphabet="ab", min_size=1, max_size=6),
        st.text(alphabet="abx", max_size=3),
        st.integers(0, 10_000),
    )
    @settings(max_examples=200, deadline=None)
    def test_apply_never_returns_input(self, value, rhs, seed):
        lhs = value[:2]
        if lhs == rhs:
            return
        rng = np.random.RandomState(seed)
        assert apply(T(lhs, rhs), value, rng) != value


def make_training_set(correct_values, error_pairs=()):
    entries = []
    for k, v in enumerate(correct_values):
        entries.append(LabeledCell(CellRef(k, 0), v, v))
    for k, (clean, dirty) in enumerate(error_pairs):
        entries.append(LabeledCell(CellRef(k, 1), dirty, clean))
    return TrainingSet(entries)


class TestAugment:
    def test_balance_half_reaches_parity(self):
        train = make_training_set(["abc", "abd", "bcd", "cde"], [("ab", "axb")])
        channel = NoisyChannel.learn([LabeledPair("ab", "axb")])
        out = augment(train, channel, AugConfig(seed=1))
        # p=4 correct, n=1 error; target = p - n = 3
        assert len(out) == 3
        assert all(e.is_error for e in out)
        assert all(e.observed != e.truth for e in out)

    def test_synthetic_examples_keep_source_cell_and_truth(self):
        train = make_training_set(["abc"], [("ab", "axb")])
        channel = NoisyChannel.learn([LabeledPair("ab", "axb")])
        out = augment(train, channel, AugConfig(seed=0, balance=0.75))
        assert len(out) == synthetic_error_target(1, 1, 0.75) == 2
        for e in out:
            assert e.cell == CellRef(0, 0)
            assert e.truth == "abc"

    def test_alpha_zero_warns_and_yields_nothing(self):
        train = make_training_set(["abc", "abd"], [("ab", "axb")])
        channel = NoisyChannel.learn([LabeledPair("ab", "axb")])
        with pytest.warns(UserWarning, match="augmentation stopped at 0/"):
            out = augment(train, channel, AugConfig(alpha=0.0, seed=0, max_iter_factor=50))
        assert out == []

    def test_deterministic_per_seed(self):
        train = make_training_set(["abc", "abd", "bcd"], [("ab", "axb")])
        channel = NoisyChannel.learn([LabeledPair("ab", "axb")])
        a = augment(train, channel, AugConfig(seed=5))
        b = augment(train, channel, AugConfig(seed=5))
        assert a == b
        c = augment(train, channel, AugConfig(seed=6))
        assert a != c  # different draws almost surely

    def test_error_dominated_set_warns(self):
        train = make_training_set(["abc"], [("ab", "axb"), ("cd", "cxd")])
        channel = NoisyChannel.learn([LabeledPair("ab", "axb")])
        with pytest.warns(UserWarning, match="nothing to augment"):
            assert augment(train, channel, AugConfig(seed=0)) == []

    def test_inapplicable_policy_warns(self):
        train = make_training_set(["qqq", "qqr"], [("ab", "cd")])
        # only transformation is ab -> cd; no correct value contains "ab"
        channel = NoisyChannel.learn([LabeledPair("ab", "cd")])
        with pytest.warns(UserWarning, match="augmentation stopped"):
            out = augment(train, channel, AugConfig(seed=0, max_iter_factor=20))
        assert out == []

    def test_config_validation(self):
        with pytest.raises(DataError):
            AugConfig(alpha=1.5)
        with pytest.raises(DataError):
            AugConfig(balance=0.0)
        with pytest.raises(DataError):
            AugConfig(balance=1.0)


class TestSyntheticTarget:
    def test_parity_rule(self):
        assert synthetic_error_target(100, 10, 0.5) == 90

    def test_zero_when_already_balanced(self):
        assert synthetic_error_target(10, 10, 0.5) == 0
        assert synthetic_error_target(5, 10, 0.5) == 0

    def test_high_balance(self):
        assert synthetic_error_target(10, 0, 0.9) == 90

    @given(st.integers(0, 200), st.integers(0, 200), st.floats(0.05, 0.95))
    @settings(max_examples=200, deadline=None)
    def test_target_achieves_requested_fraction(self, p, n, b):
        k = synthetic_error_target(p, n, b)
        if k > 0:
            assert (n + k) / (p + n + k) >= b - 1e-9
            assert (n + k - 1) / (p + n + k - 1) < b + 1e-9


class TestWeakLabels:
    def make_fd_dataset(self, typo_row=None):
        rows = []
        cities = [("Ames", "50010", "Story"), ("Boone", "50036", "Boone"), ("Clive", "50325", "Polk")]
        for k in range(30):
            rows.append(cities[k % 3])
        if typo_row is not None:
            rows[typo_row] = ("Ames", "5001x0", "Story")
        return Dataset(Schema(("city", "zip", "county")), rows)

    def test_detects_fd_breaking_typo(self):
        ds = self.make_fd_dataset(typo_row=4)
        out = weak_label_cells(ds, threshold=0.9)
        # hand NB check: posterior(50010) = e^-1.568/(e^-1.568+e^-4.787+2e^-6.229) ~ 0.944
        assert {cell for cell, _ in out} == {CellRef(4, 1)}
        pair = dict(out)[CellRef(4, 1)]
        assert pair == LabeledPair(clean="50010", dirty="5001x0")

    def test_clean_fd_dataset_emits_nothing(self):
        ds = self.make_fd_dataset()
        assert weak_label_cells(ds, threshold=0.9) == []

    def test_threshold_monotone(self):
        ds = self.make_fd_dataset(typo_row=2)
        low = {cell for cell, _ in weak_label_cells(ds, threshold=0.5)}
        high = {cell for cell, _ in weak_label_cells(ds, threshold=0.99)}
        assert high <= low

    def test_pairs_wrapper(self):
        ds = self.make_fd_dataset(typo_row=4)
        pairs = weak_label_pairs(ds, threshold=0.9)
        assert LabeledPair("50010", "5001x0") in pairs

    def test_single_attribute_rejected(self):
        ds = Dataset(Schema(("only",)), [("a",), ("b",)])
        with pytest.raises(DataError, match="2 attributes"):
            weak_label_cells(ds)


class TestNoisyChannel:
    def test_corrupt_round_trip_properties(self):
        pairs = [LabeledPair("60612", "6061x2"), LabeledPair("Madison", "Madixson")]
        channel = NoisyChannel.learn(pairs)
        rng = np.random.RandomState(11)
        for value in ["60612", "Madison", "Chicago", "zzz"]:
            for _ in range(50):
                out = channel.corrupt(value, rng)
                if out is not None:
                    assert out != value

    def test_corrupt_none_when_nothing_applies(self):
        channel = NoisyChannel(
            (T("q", "z"),), empirical_policy([[T("q", "z")]])
        )
        assert channel.corrupt("abc", np.random.RandomState(0)) is None

    def test_conditional_is_cached(self):
        channel = NoisyChannel.learn([LabeledPair("a", "ax")])
        assert channel.conditional("foo") is channel.conditional("foo")
