import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcrp.exceptions import InputError
from pcrp.metrics import (
    ContingencyTable,
    Partition,
    adjusted_mutual_info,
    adjusted_rand_index,
    cluster_count_deviation,
    dense_labels,
    fowlkes_mallows,
    mutual_info,
    normalized_variation_of_information,
    score_all,
    variation_of_information,
)


def brute_pairs(a, b):
    """(both, only a, only b, neither) over all unordered point pairs."""
    both = only_a = only_b = neither = 0
    for i, j in combinations(range(len(a)), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        both += sa and sb
        only_a += sa and not sb
        only_b += sb and not sa
        neither += not sa and not sb
    return both, only_a, only_b, neither


def brute_ari(a, b):
    n11, n10, n01, n00 = brute_pairs(a, b)
    total = n11 + n10 + n01 + n00
    pa, pb = n11 + n10, n11 + n01
    expected = pa * pb / total
    maximum = (pa + pb) / 2
    if maximum == expected:
        return 1.0
    return (n11 - expected) / (maximum - expected)


def brute_fm(a, b):
    n11, n10, n01, _ = brute_pairs(a, b)
    pa, pb = n11 + n10, n11 + n01
    if pa == 0 and pb == 0:
        return 1.0
    if pa == 0 or pb == 0:
        return 0.0
    return n11 / math.sqrt(pa * pb)


labelings = st.integers(2, 40).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 6), min_size=n, max_size=n),
                        st.lists(st.integers(0, 6), min_size=n, max_size=n)))


def test_pair_counting_oracle_200_pairs():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 51))
        a = rng.integers(0, rng.integers(1, 8), n)
        b = rng.integers(0, rng.integers(1, 8), n)
        if not (np.unique(a).size in (1, n) and np.unique(a).size == np.unique(b).size):
            assert adjusted_rand_index(a, b) == pytest.approx(brute_ari(a, b), abs=1e-12)
        assert fowlkes_mallows(a, b) == pytest.approx(brute_fm(a, b), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(labelings, st.permutations(range(7)), st.permutations(range(7)))
def test_invariances(ab, perm_a, perm_b):
    a, b = np.array(ab[0]), np.array(ab[1])
    pa, pb = np.array(perm_a)[a], np.array(perm_b)[b]
    for metric in (adjusted_rand_index, adjusted_mutual_info, normalized_variation_of_information,
                   fowlkes_mallows):
        v = metric(a, b)
        assert metric(pa, pb) == pytest.approx(v, abs=1e-10)       # relabelling
        assert metric(b, a) == pytest.approx(v, abs=1e-10)         # symmetry


@settings(max_examples=200, deadline=None)
@given(labelings)
def test_ranges(ab):
    a, b = ab
    assert 0 <= normalized_variation_of_information(a, b) <= 1 + 1e-12
    assert 0 <= fowlkes_mallows(a, b) <= 1 + 1e-12
    assert adjusted_rand_index(a, b) <= 1 + 1e-12
    assert adjusted_mutual_info(a, b) <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=40))
def test_identity(a):
    assert adjusted_rand_index(a, a) == pytest.approx(1.0)
    assert adjusted_mutual_info(a, a) == pytest.approx(1.0)
    assert normalized_variation_of_information(a, a) == pytest.approx(0.0, abs=1e-12)
    assert fowlkes_mallows(a, a) == pytest.approx(1.0)


def test_sklearn_cross_check():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(5, 300))
        a = rng.integers(0, rng.integers(2, 10), n)
        b = rng.integers(0, rng.integers(2, 10), n)
        assert adjusted_rand_index(a, b) == pytest.approx(sk.adjusted_rand_score(a, b), abs=1e-10)
        assert adjusted_mutual_info(a, b) == pytest.approx(
            sk.adjusted_mutual_info_score(a, b, average_method="max"), abs=1e-10)
        assert fowlkes_mallows(a, b) == pytest.approx(sk.fowlkes_mallows_score(a, b), abs=1e-10)
        assert mutual_info(a, b) == pytest.approx(sk.mutual_info_score(a, b), abs=1e-10)


def test_ami_near_zero_for_independent_labels():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 10, 10_000)
    b = rng.integers(0, 10, 10_000)
    assert abs(adjusted_mutual_info(a, b)) < 0.02
    assert abs(adjusted_rand_index(a, b)) < 0.02


def test_four_point_witness():
    a = [0, 0, 1, 1]
    b = [0, 0, 0, 1]
    # pairs: a groups {01, 23}; b groups {01, 02, 12}; shared {01}
    assert fowlkes_mallows(a, b) == pytest.approx(1 / math.sqrt(2 * 3))
    assert adjusted_rand_index(a, b) == pytest.approx(brute_ari(a, b))
    h_a = math.log(2)
    h_b = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    mi = 0.5 * math.log(2 / 1.5) + 0.25 * math.log(1 / 1.5) + 0.25 * math.log(2)
    assert mutual_info(a, b) == pytest.approx(mi)
    assert variation_of_information(a, b) == pytest.approx(h_a + h_b - 2 * mi)
    assert normalized_variation_of_information(a, b) == pytest.approx((h_a + h_b - 2 * mi) / math.log(4))


def test_trivial_partitions():
    ones = [0] * 6
    singles = list(range(6))
    assert adjusted_rand_index(ones, ones) == 1.0
    assert adjusted_mutual_info(singles, singles) == 1.0
    assert fowlkes_mallows(singles, singles) == 1.0
    assert fowlkes_mallows(singles, ones) == 0.0
    assert adjusted_rand_index(ones, singles) == pytest.approx(0.0, abs=1e-12)
    assert normalized_variation_of_information(ones, singles) == pytest.approx(1.0)


def test_length_mismatch():
    with pytest.raises(InputError):
        adjusted_rand_index([0, 1], [0, 1, 1])
    with pytest.raises(InputError):
        score_all([0, 1], [0])


def test_cluster_count_deviation():
    assert cluster_count_deviation(4, 3) == pytest.approx(1 / 3)
    assert cluster_count_deviation(3, 3) == 0.0
    with pytest.raises(InputError):
        cluster_count_deviation(3, 0)


def test_partition_and_table():
    p = Partition([7, 7, 3, 9, 3])
    assert p.labels.tolist() == [0, 0, 1, 2, 1]
    assert p.n_clusters == 3 and len(p) == 5
    assert dense_labels([]).size == 0
    t = ContingencyTable.from_labels(p, [1, 1, 1, 0, 0])
    assert t.n == 5
    assert t.rows.tolist() == [2, 2, 1] and t.cols.tolist() == [3, 2]
    assert t.counts.sum() == 5


def test_score_all_keys():
    s = score_all([0, 0, 1, 1], [0, 0, 1, 2])
    assert set(s) == {"ari", "ami", "nvi", "fm", "k_deviation", "k_true", "k_inferred"}
    assert s["k_true"] == 2 and s["k_inferred"] == 3 and s["k_deviation"] == 0.5
