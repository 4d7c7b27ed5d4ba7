import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from face3dqa.agreement import (
    ConstantVectorError,
    PairedScores,
    QaMode,
    krcc,
    plcc,
    qa_accuracy,
    rank,
    srcc,
)


# -- independent definitional oracles ----------------------------------------


def rank_by_sort_position(values):
    """Average of 1-based sort positions over each tie group."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    positions = {}
    for pos, idx in enumerate(order, start=1):
        positions.setdefault(values[idx], []).append((pos, idx))
    ranks = [0.0] * len(values)
    for value, group in positions.items():
        avg = sum(pos for pos, _ in group) / len(group)
        for _, idx in group:
            ranks[idx] = avg
    return ranks


def pearson_oracle(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    dx = math.sqrt(sum((x - mx) ** 2 for x in xs))
    dy = math.sqrt(sum((y - my) ** 2 for y in ys))
    return num / (dx * dy)


def srcc_closed_form(xs, ys):
    """1 - 6*sum(d^2)/(N(N^2-1)); valid for tie-free inputs."""
    vx = rank_by_sort_position(xs)
    vy = rank_by_sort_position(ys)
    n = len(xs)
    d2 = sum((a - b) ** 2 for a, b in zip(vx, vy))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def krcc_pair_count(xs, ys):
    n = len(xs)
    c = d = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = (xs[i] - xs[j]) * (ys[i] - ys[j])
            if s > 0:
                c += 1
            elif s < 0:
                d += 1
    return (c - d) / (n * (n - 1) / 2)


def random_tie_free_pair(rnd, n):
    xs = rnd.sample(range(10 * n), n)
    ys = rnd.sample(range(10 * n), n)
    return [float(x) for x in xs], [float(y) for y in ys]


# -- rank ---------------------------------------------------------------------


class TestRank:
    def test_sorted(self):
        assert list(rank([10, 20, 30])) == [1, 2, 3]

    def test_tie_average(self):
        assert list(rank([5, 5, 1])) == [2.5, 2.5, 1]

    def test_permutation(self):
        assert list(rank([3, 1, 2])) == [3, 1, 2]

    def test_matches_sort_position_oracle(self):
        rnd = random.Random(0)
        for _ in range(50):
            values = [rnd.choice(range(6)) * 0.5 for _ in range(rnd.randint(1, 15))]
            assert list(rank(values)) == rank_by_sort_position(values)


# -- correlations --------------------------------------------------------------


class TestSrcc:
    def test_monotone_agreement(self):
        assert srcc([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0

    def test_reversal(self):
        assert srcc([1, 2, 3, 4], [40, 30, 20, 10]) == -1.0

    def test_hand_case(self):
        # d^2 = 4 + 1 + 1 -> 1 - 36/24
        assert srcc([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5, abs=1e-15)

    def test_constant_error(self):
        with pytest.raises(ConstantVectorError):
            srcc([1, 1, 1], [1, 2, 3])

    def test_closed_form_cross_check(self):
        rnd = random.Random(1)
        for _ in range(300):
            xs, ys = random_tie_free_pair(rnd, rnd.randint(2, 12))
            assert srcc(xs, ys) == pytest.approx(srcc_closed_form(xs, ys), abs=1e-12)

    def test_ties_use_average_ranks(self):
        xs = [1.0, 2.0, 2.0, 3.0]
        ys = [4.0, 5.0, 6.0, 7.0]
        assert srcc(xs, ys) == pytest.approx(
            pearson_oracle(rank_by_sort_position(xs), rank_by_sort_position(ys)), abs=1e-12)


class TestPlcc:
    def test_identity(self):
        assert plcc([1, 2, 3], [1, 2, 3]) == 1.0

    def test_negative_affine(self):
        gt = [1.0, 2.0, 3.0, 4.0]
        assert plcc(gt, [-g + 7 for g in gt]) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_case(self):
        assert plcc([1, 2, 3], [1, 2, 4]) == pytest.approx(9 / math.sqrt(84), abs=1e-12)

    def test_matches_definitional_oracle(self):
        rnd = random.Random(2)
        for _ in range(200):
            xs, ys = random_tie_free_pair(rnd, rnd.randint(2, 12))
            assert plcc(xs, ys) == pytest.approx(pearson_oracle(xs, ys), abs=1e-12)

    def test_constant_error(self):
        with pytest.raises(ConstantVectorError):
            plcc([2, 2], [1, 3])


class TestKrcc:
    def test_all_concordant(self):
        assert krcc([1, 2, 3], [1, 2, 3]) == 1.0

    def test_all_discordant(self):
        assert krcc([1, 2, 3], [3, 2, 1]) == -1.0

    def test_hand_case_exact(self):
        # pairs: (1,2) discordant, (1,3) and (2,3) concordant
        assert krcc([1, 2, 3], [2, 1, 3]) == 1 / 3

    def test_matches_pair_count_bruteforce(self):
        rnd = random.Random(3)
        for _ in range(200):
            n = rnd.randint(2, 12)
            xs = [rnd.choice(range(8)) * 1.0 for _ in range(n)]
            ys = [rnd.choice(range(8)) * 1.0 for _ in range(n)]
            assert krcc(xs, ys) == krcc_pair_count(xs, ys)


class TestCorrelationProperties:
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_transform_invariance(self, seed):
        rnd = random.Random(seed)
        xs, ys = random_tie_free_pair(rnd, rnd.randint(3, 12))
        warped = [math.exp(0.3 * x / len(xs)) for x in xs]
        assert srcc(warped, ys) == pytest.approx(srcc(xs, ys), abs=1e-12)
        assert krcc(warped, ys) == pytest.approx(krcc(xs, ys), abs=1e-12)

    @given(st.integers(0, 2**32 - 1),
           st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3),
           st.floats(-10, 10))
    def test_plcc_affine_equivariance(self, seed, a, b):
        rnd = random.Random(seed)
        xs, ys = random_tie_free_pair(rnd, rnd.randint(3, 10))
        scaled = [a * x + b for x in xs]
        assert plcc(scaled, ys) == pytest.approx(math.copysign(1, a) * plcc(xs, ys),
                                                 abs=1e-12)

    def test_range_and_self_correlation(self):
        rnd = random.Random(4)
        for _ in range(100):
            xs, ys = random_tie_free_pair(rnd, rnd.randint(2, 12))
            for value in (srcc(xs, ys), plcc(xs, ys), krcc(xs, ys)):
                assert -1.0 <= value <= 1.0 + 1e-15
            assert srcc(xs, xs) == 1.0
            assert plcc(xs, xs) == 1.0
            assert krcc(xs, xs) == 1.0


class TestPairedScores:
    def test_bundles_and_validates(self):
        pair = PairedScores(("a", "b", "c"), np.array([1.0, 2, 3]), np.array([3.0, 2, 1]))
        assert pair.srcc() == -1.0
        assert pair.krcc() == -1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            PairedScores(("a",), np.array([1.0, 2]), np.array([1.0]))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            PairedScores((), np.array([1.0, float("nan")]), np.array([1.0, 2.0]))


class TestQaAccuracy:
    def test_identical(self):
        sets = [{"a"}, {"b", "c"}, {"d"}]
        assert qa_accuracy(sets, sets) == 1.0
        assert qa_accuracy(sets, sets, mode=QaMode.JACCARD) == 1.0

    def test_disjoint_is_zero_in_both_modes(self):
        truth = [{"a"}, {"b"}]
        pred = [{"x"}, {"y"}]
        assert qa_accuracy(truth, pred) == 0.0
        assert qa_accuracy(truth, pred, mode=QaMode.JACCARD) == 0.0

    def test_two_of_three_exact(self):
        truth = [{"a"}, {"b"}, {"c"}]
        pred = [{"a"}, {"b"}, {"x"}]
        assert qa_accuracy(truth, pred) == pytest.approx(2 / 3, abs=1e-12)

    def test_jaccard_partial_credit(self):
        truth = [{"a", "b"}]
        pred = [{"a"}]
        assert qa_accuracy(truth, pred, mode=QaMode.JACCARD) == 0.5
        assert qa_accuracy(truth, pred) == 0.0
