"""Powered conditional Dirichlet prior and Powered Dirichlet-Multinomial law.

The history of draws enters the Dirichlet through element-wise powered
counts ``N_k**r``. Those are generally non-integer, so factorials are taken
as ``lgamma(x + 1)``. Everything here works in log space.

A count of zero stays zero for every ``r`` (including ``r = 0``): a category
that was never drawn contributes no history.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import EnumerationTooLarge, InputError, ParameterDomainError

SIMPLEX_TOL = 1e-12
MAX_COMPOSITIONS = 2_000_000


def powered_counts(counts, r: float) -> np.ndarray:
    """Element-wise ``N_k**r`` with ``0**r = 0``, evaluated as exp(r log N_k)."""
    counts = np.asarray(counts, dtype=float)
    out = np.zeros_like(counts)
    pos = counts > 0
    out[pos] = np.exp(r * np.log(counts[pos]))
    return out


def log_multivariate_beta(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(gammaln(x)) - gammaln(np.sum(x)))


@dataclass(frozen=True)
class PoweredDirichletParams:
    alpha_vec: np.ndarray
    counts: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha_vec, dtype=float))
        n = np.atleast_1d(np.asarray(self.counts, dtype=float))
        if a.shape != n.shape or a.ndim != 1:
            raise InputError("alpha_vec and counts must be 1-D vectors of equal length")
        if not np.all(a > 0):
            raise ParameterDomainError("every concentration alpha_k must be > 0")
        if not np.all(n >= 0):
            raise ParameterDomainError("counts must be non-negative")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ParameterDomainError(f"power r must be a finite real >= 0, got {self.r}")
        object.__setattr__(self, "alpha_vec", a)
        object.__setattr__(self, "counts", n)

    @property
    def dim(self) -> int:
        return self.alpha_vec.shape[0]

    @property
    def shape_params(self) -> np.ndarray:
        """Dirichlet parameters alpha + N**r of the powered prior."""
        return self.alpha_vec + powered_counts(self.counts, self.r)


def check_simplex_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise InputError("a simplex point is a 1-D vector")
    if np.any(p <= 0) or np.any(p >= 1):
        raise ParameterDomainError("simplex point must lie strictly inside the simplex")
    if abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ParameterDomainError(f"simplex point sums to {p.sum()!r}, not 1")
    return p


def log_powered_dirichlet_density(p, params: PoweredDirichletParams) -> float:
    """log Dir_r(p | alpha, N): a Dirichlet with parameters alpha + N**r."""
    p = check_simplex_point(p)
    if p.shape[0] != params.dim:
        raise InputError("dimension mismatch between p and params")
    a = params.shape_params
    return float(np.sum((a - 1.0) * np.log(p)) - log_multivariate_beta(a))


def posterior_predictive(params: PoweredDirichletParams, cluster: int) -> float:
    """Probability that the next draw falls in ``cluster``: (N_c^r + a_c) / sum_k (N_k^r + a_k)."""
    if not 0 <= cluster < params.dim:
        raise InputError(f"cluster index {cluster} out of range for dimension {params.dim}")
    a = params.shape_params
    return float(a[cluster] / a.sum())


def posterior_predictive_vector(params: PoweredDirichletParams) -> np.ndarray:
    a = params.shape_params
    return a / a.sum()


def log_powered_dirichlet_multinomial(counts, alpha_vec, r: float) -> float:
    """log DirMult_r(N | alpha).

    Equals ``log[B(alpha + N^r) Gamma(sum N^r + 1) / (B(alpha) prod Gamma(N_k^r + 1))]``.
    For r = 1 this is the ordinary Dirichlet-Multinomial pmf. For other r
    it does *not* sum to one over the compositions of a fixed N; see
    ``log_powered_dirichlet_multinomial_renormalized``.
    """
    params = PoweredDirichletParams(alpha_vec, counts, r)
    nr = powered_counts(params.counts, r)
    return float(log_multivariate_beta(params.alpha_vec + nr)
                 + gammaln(nr.sum() + 1.0)
                 - log_multivariate_beta(params.alpha_vec)
                 - np.sum(gammaln(nr + 1.0)))


def compositions(n: int, k: int):
    """All vectors of ``k`` non-negative integers summing to ``n`` (stars and bars)."""
    if k < 1 or n < 0:
        raise InputError("need k >= 1 and n >= 0")
    if math.comb(n + k - 1, k - 1) > MAX_COMPOSITIONS:
        raise EnumerationTooLarge(f"too many compositions of {n} into {k} parts")
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(n + k - 1 - prev - 1)
        yield tuple(parts)


def log_total_mass(n: int, alpha_vec, r: float) -> float:
    """log of the pmf summed over every composition of ``n`` into len(alpha) parts.

    Zero for r = 1; generally non-zero otherwise.
    """
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    logs = [log_powered_dirichlet_multinomial(c, alpha_vec, r)
            for c in compositions(n, alpha_vec.shape[0])]
    return float(logsumexp(logs))


def log_powered_dirichlet_multinomial_renormalized(counts, alpha_vec, r: float) -> float:
    """Powered Dirichlet-Multinomial renormalized over integer compositions of sum(counts)."""
    counts = np.asarray(counts)
    if np.any(counts != np.round(counts)):
        raise InputError("renormalization is defined over integer counts only")
    n = int(np.sum(counts))
    return (log_powered_dirichlet_multinomial(counts, alpha_vec, r)
            - log_total_mass(n, alpha_vec, r))
