"""Agreement between two hard partitions of the same points.

Conventions:

* AMI is normalized by ``max(H(a), H(b))``.
* Variation of information is divided by ``ln n`` (0 when n = 1).
* Fowlkes-Mallows is 1 when neither partition has a co-clustered pair, and
  0 when exactly one of them has none.
* ARI and AMI are 1 when both partitions are the same trivial partition
  (all-in-one or all-singletons), where the chance correction is 0/0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import InputError


@dataclass(frozen=True)
class Partition:
    """Cluster label per point, relabelled densely in order of first appearance."""

    labels: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.labels).reshape(-1)
        object.__setattr__(self, "labels", dense_labels(raw))

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def __len__(self):
        return self.labels.shape[0]


def dense_labels(labels) -> np.ndarray:
    """Map arbitrary labels onto 0..K-1, numbered by first appearance."""
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        return np.zeros(0, dtype=np.int64)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.reshape(-1)].astype(np.int64)


def _labels(x) -> np.ndarray:
    return x.labels if isinstance(x, Partition) else dense_labels(x)


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @classmethod
    def from_labels(cls, a, b) -> "ContingencyTable":
        la, lb = _labels(a), _labels(b)
        if la.shape != lb.shape:
            raise InputError(f"partitions have different lengths ({la.size} vs {lb.size})")
        ka = int(la.max()) + 1 if la.size else 0
        kb = int(lb.max()) + 1 if lb.size else 0
        table = np.zeros((ka, kb), dtype=np.int64)
        np.add.at(table, (la, lb), 1)
        return cls(table)

    @property
    def rows(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def cols(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def _pairs(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * (x - 1) / 2))


def _entropy(marginal: np.ndarray, n: int) -> float:
    p = marginal[marginal > 0] / n
    return float(-np.sum(p * np.log(p)))


def _mutual_info(t: ContingencyTable) -> float:
    n = t.n
    nz = t.counts > 0
    nij = t.counts[nz].astype(float)
    outer = np.outer(t.rows, t.cols)[nz].astype(float)
    return float(np.sum(nij / n * (np.log(n * nij) - np.log(outer))))


def _expected_mutual_info(t: ContingencyTable) -> float:
    # permutation-model expectation, summed over the hypergeometric support of each cell
    n = t.n
    a = t.rows.astype(np.int64)
    b = t.cols.astype(np.int64)
    lg_n = gammaln(n + 1)
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            log_p = (gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                     - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                     - gammaln(n - ai - bj + nij + 1))
            term = nij / n * (np.log(n * nij) - math.log(ai * bj))
            emi += float(np.sum(term * np.exp(log_p)))
    return emi


def _trivially_equal(t: ContingencyTable) -> bool:
    ka, kb = t.counts.shape
    return (ka == kb == 1) or (ka == kb == t.n)


def adjusted_rand_index(a, b) -> float:
    t = ContingencyTable.from_labels(a, b)
    if t.n < 2 or _trivially_equal(t):
        return 1.0
    index = _pairs(t.counts)
    sa, sb = _pairs(t.rows), _pairs(t.cols)
    expected = sa * sb / (t.n * (t.n - 1) / 2)
    maximum = (sa + sb) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


def mutual_info(a, b) -> float:
    return _mutual_info(ContingencyTable.from_labels(a, b))


def adjusted_mutual_info(a, b) -> float:
    t = ContingencyTable.from_labels(a, b)
    if t.n == 0 or _trivially_equal(t):
        return 1.0
    mi = _mutual_info(t)
    emi = _expected_mutual_info(t)
    denom = max(_entropy(t.rows, t.n), _entropy(t.cols, t.n)) - emi
    if denom == 0:
        return 1.0 if mi == emi else 0.0
    return (mi - emi) / denom


def variation_of_information(a, b) -> float:
    t = ContingencyTable.from_labels(a, b)
    if t.n == 0:
        return 0.0
    vi = _entropy(t.rows, t.n) + _entropy(t.cols, t.n) - 2 * _mutual_info(t)
    return max(vi, 0.0)


def normalized_variation_of_information(a, b) -> float:
    t = ContingencyTable.from_labels(a, b)
    if t.n <= 1:
        return 0.0
    return variation_of_information(a, b) / math.log(t.n)


def fowlkes_mallows(a, b) -> float:
    t = ContingencyTable.from_labels(a, b)
    tp = _pairs(t.counts)
    pa, pb = _pairs(t.rows), _pairs(t.cols)
    if pa == 0 and pb == 0:
        return 1.0
    if pa == 0 or pb == 0:
        return 0.0
    return tp / math.sqrt(pa * pb)


def cluster_count_deviation(inferred_k: int, true_k: int) -> float:
    """|inferred_k - true_k| / true_k."""
    if true_k <= 0:
        raise InputError("true number of clusters must be positive")
    return abs(inferred_k - true_k) / true_k


def score_all(truth, inferred) -> dict[str, float]:
    """All five partition metrics, keyed by short name."""
    la, lb = _labels(truth), _labels(inferred)
    ta = int(la.max()) + 1 if la.size else 0
    tb = int(lb.max()) + 1 if lb.size else 0
    return {
        "ari": adjusted_rand_index(la, lb),
        "ami": adjusted_mutual_info(la, lb),
        "nvi": normalized_variation_of_information(la, lb),
        "fm": fowlkes_mallows(la, lb),
        "k_deviation": cluster_count_deviation(tb, ta) if ta else float("nan"),
        "k_true": ta,
        "k_inferred": tb,
    }
