import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import gammaln

from pcrp.exceptions import EnumerationTooLarge, InputError, ParameterDomainError
from pcrp.powered_dirichlet import (
    PoweredDirichletParams,
    check_simplex_point,
    compositions,
    log_powered_dirichlet_density,
    log_powered_dirichlet_multinomial,
    log_powered_dirichlet_multinomial_renormalized,
    log_total_mass,
    posterior_predictive,
    posterior_predictive_vector,
    powered_counts,
)


def _integrand_log(p, counts, alpha, r):
    """log of Mult(N^r | p) * Dir(p | alpha) at p = (p, 1 - p), gamma-generalized."""
    nr = powered_counts(counts, r)
    log_mult = gammaln(nr.sum() + 1) - gammaln(nr + 1).sum() + nr[0] * math.log(p) + nr[1] * math.log1p(-p)
    return log_mult + stats.beta.logpdf(p, alpha[0], alpha[1])


# -- density ----------------------------------------------------------------

def test_density_uniform_on_simplex():
    params = PoweredDirichletParams([1, 1], [0, 0], 1.0)
    assert log_powered_dirichlet_density([0.5, 0.5], params) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("t", [0.1, 0.5, 0.77])
def test_density_beta_3_1(t):
    params = PoweredDirichletParams([1, 1], [2, 0], 1.0)
    assert log_powered_dirichlet_density([t, 1 - t], params) == pytest.approx(math.log(3 * t * t), abs=1e-12)


@pytest.mark.parametrize("alpha, counts, r", [
    ([1, 1], [1, 2], 2.0), ([0.5, 2.0], [3, 1], 0.5), ([1.5, 1.5], [4, 0], 0.0)])
def test_density_integrates_to_one_on_grid(alpha, counts, r):
    params = PoweredDirichletParams(alpha, counts, r)
    t = (np.arange(10_000) + 0.5) / 10_000      # midpoint rule, 1e4 points
    dens = np.exp([log_powered_dirichlet_density([x, 1 - x], params) for x in t])
    assert dens.mean() == pytest.approx(1.0, abs=1e-3)


def test_density_three_dim_matches_scipy_dirichlet():
    params = PoweredDirichletParams([1.0, 2.0, 0.5], [4, 0, 9], 0.5)
    p = np.array([0.2, 0.3, 0.5])
    ref = stats.dirichlet.logpdf(p, [1 + 2, 2 + 0, 0.5 + 3])
    assert log_powered_dirichlet_density(p, params) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("p", [[0.0, 1.0], [0.5, 0.6], [1.2, -0.2], [[0.5, 0.5]]])
def test_density_rejects_bad_points(p):
    params = PoweredDirichletParams([1, 1], [0, 0], 1.0)
    with pytest.raises((ParameterDomainError, InputError)):
        log_powered_dirichlet_density(p, params)


def test_simplex_tolerance():
    check_simplex_point([0.5, 0.5 + 5e-13])
    with pytest.raises(ParameterDomainError):
        check_simplex_point([0.5, 0.5 + 5e-12])


@pytest.mark.parametrize("kw", [
    dict(alpha_vec=[1, 0], counts=[1, 1]), dict(alpha_vec=[1, 1], counts=[1, -1]),
    dict(alpha_vec=[1, 1], counts=[1, 1], r=-1.0)])
def test_params_domain(kw):
    with pytest.raises(ParameterDomainError):
        PoweredDirichletParams(**kw)


def test_params_length_mismatch():
    with pytest.raises(InputError):
        PoweredDirichletParams([1, 1, 1], [1, 1])


def test_zero_count_stays_zero_for_every_r():
    np.testing.assert_array_equal(powered_counts([0, 1, 4], 0.0), [0, 1, 1])
    np.testing.assert_allclose(powered_counts([0, 1, 4], 0.5), [0, 1, 2], rtol=1e-15)


# -- predictive -------------------------------------------------------------

def test_predictive_examples():
    assert posterior_predictive(PoweredDirichletParams([1, 1], [1, 2], 2.0), 1) == pytest.approx(5 / 7, abs=1e-15)
    for r in (0.0, 0.3, 1.0, 2.5):
        assert posterior_predictive(PoweredDirichletParams([1, 1], [0, 0], r), 0) == 0.5
    assert posterior_predictive(PoweredDirichletParams([1, 1], [3, 1], 1.0), 0) == pytest.approx(4 / 6, abs=1e-15)


def test_predictive_index_out_of_range():
    with pytest.raises(InputError):
        posterior_predictive(PoweredDirichletParams([1, 1], [0, 0]), 2)


@settings(max_examples=200, deadline=None)
@given(k=st.integers(1, 8), data=st.data())
def test_predictive_sums_to_one_and_r1_is_classical(k, data):
    alpha = np.array(data.draw(st.lists(st.floats(0.01, 10), min_size=k, max_size=k)))
    counts = np.array(data.draw(st.lists(st.integers(0, 50), min_size=k, max_size=k)), dtype=float)
    r = data.draw(st.floats(0, 3))
    vec = posterior_predictive_vector(PoweredDirichletParams(alpha, counts, r))
    assert vec.sum() == pytest.approx(1.0, abs=1e-12)
    classical = (alpha + counts) / (alpha.sum() + counts.sum())
    np.testing.assert_allclose(posterior_predictive_vector(PoweredDirichletParams(alpha, counts, 1.0)),
                               classical, rtol=1e-13)


def test_predictive_r_to_zero_limit():
    alpha = np.array([1.0, 1.0, 1.0])
    counts = np.array([10.0, 3.0, 1.0])
    near_zero = posterior_predictive_vector(PoweredDirichletParams(alpha, counts, 1e-9))
    np.testing.assert_allclose(near_zero, (1 + alpha) / (1 + alpha).sum(), atol=1e-8)


# -- Powered Dirichlet-Multinomial -------------------------------------------

def test_pmf_example_two_draws():
    assert log_powered_dirichlet_multinomial([1, 1], [1, 1], 1.0) == pytest.approx(math.log(1 / 3), abs=1e-14)


@pytest.mark.parametrize("n, alpha", [(3, [1, 1]), (6, [1, 1, 1]), (5, [0.3, 2.0, 1.1, 0.7])])
def test_pmf_normalized_at_r1(n, alpha):
    total = sum(math.exp(log_powered_dirichlet_multinomial(c, alpha, 1.0)) for c in compositions(n, len(alpha)))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_pmf_r1_matches_scipy_dirichlet_multinomial():
    counts, alpha = [3, 0, 2], [0.5, 1.5, 2.0]
    ref = stats.dirichlet_multinomial.logpmf(counts, alpha, sum(counts))
    assert log_powered_dirichlet_multinomial(counts, alpha, 1.0) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("counts, alpha, r", [
    ([4, 1], [1, 1], 0.5), ([2, 3], [0.7, 1.9], 0.5), ([3, 1], [1, 1], 2.0), ([5, 0], [2, 1], 1.3)])
def test_pmf_matches_quadrature(counts, alpha, r):
    val, err = integrate.quad(lambda p: math.exp(_integrand_log(p, np.asarray(counts, float), alpha, r)),
                              0, 1, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert math.exp(log_powered_dirichlet_multinomial(counts, alpha, r)) == pytest.approx(val, abs=1e-6)


def test_chain_rule_holds_at_r1_for_every_order():
    alpha = np.array([1.0, 0.5])
    target = math.exp(log_powered_dirichlet_multinomial([2, 1], alpha, 1.0))
    # the pmf counts compositions, the chain rule one particular sequence
    multiplicity = 3
    for order in set(permutations([0, 0, 1])):
        counts = np.zeros(2)
        prob = 1.0
        for c in order:
            prob *= posterior_predictive(PoweredDirichletParams(alpha, counts, 1.0), c)
            counts[c] += 1
        assert prob * multiplicity == pytest.approx(target, rel=1e-13)


def test_chain_rule_fails_off_r1():
    alpha = np.array([1.0, 1.0])
    r = 0.5
    target = math.exp(log_powered_dirichlet_multinomial([2, 1], alpha, r))
    seq_probs = []
    for order in ([0, 0, 1], [0, 1, 0], [1, 0, 0]):
        counts = np.zeros(2)
        prob = 1.0
        for c in order:
            prob *= posterior_predictive(PoweredDirichletParams(alpha, counts, r), c)
            counts[c] += 1
        seq_probs.append(prob)
    assert max(seq_probs) - min(seq_probs) > 1e-3          # order matters
    assert abs(sum(seq_probs) - target) > 1e-3


def test_normalization_deficit_and_renormalized_variant():
    alpha = [1.0, 1.0]
    assert abs(log_total_mass(6, alpha, 0.5)) > 1e-3
    assert log_total_mass(6, alpha, 1.0) == pytest.approx(0.0, abs=1e-12)
    total = sum(math.exp(log_powered_dirichlet_multinomial_renormalized(c, alpha, 0.5))
                for c in compositions(6, 2))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_renormalized_rejects_fractional_counts():
    with pytest.raises(InputError):
        log_powered_dirichlet_multinomial_renormalized([1.5, 2], [1, 1], 0.5)


def test_compositions():
    got = list(compositions(3, 2))
    assert sorted(got) == [(0, 3), (1, 2), (2, 1), (3, 0)]
    assert len(list(compositions(6, 3))) == math.comb(8, 2)
    assert list(compositions(0, 3)) == [(0, 0, 0)]
    with pytest.raises(EnumerationTooLarge):
        next(compositions(200, 10))


def test_large_counts_finite():
    v = log_powered_dirichlet_multinomial([10**6, 3 * 10**5], [1, 1], 1.7)
    assert math.isfinite(v)
