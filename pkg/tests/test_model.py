import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from expert_timing.errors import DomainError
from expert_timing.model import (
    CanonicalState,
    GaussianSpec,
    MarketState,
    canonical_state,
    expert_immediate_reward,
    expert_policy_reward,
    lmsr_expected_reward,
    lmsr_realized_reward,
    normal_ccdf,
    normal_tail_bounds,
    quality_term,
    should_predict,
)

means = st.floats(-50, 50, allow_nan=False)
variances = st.floats(1e-3, 1e3, allow_nan=False)
qualities = st.floats(1e-6, 1 - 1e-6)


def test_gaussian_spec_rejects_nonpositive_variance():
    with pytest.raises(DomainError):
        GaussianSpec(0.0, 0.0)
    with pytest.raises(DomainError):
        GaussianSpec(0.0, -1.0)
    assert GaussianSpec(1.0, 4.0).std == 2.0


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_market_state_rejects_bad_quality(q):
    with pytest.raises(DomainError):
        MarketState(t=3, x_t=0.0, y_t=0.0, q=q)


def test_market_state_rejects_bad_time():
    with pytest.raises(DomainError):
        MarketState(t=0, x_t=0.0, y_t=0.0, q=0.5)


def test_realized_reward_is_log_density_ratio():
    prior, post = GaussianSpec(0.3, 2.0), GaussianSpec(-0.4, 0.7)
    for x0 in (-3.0, 0.0, 0.25, 5.0):
        expect = stats.norm.logpdf(x0, post.mean, post.std) - stats.norm.logpdf(x0, prior.mean, prior.std)
        assert lmsr_realized_reward(prior, post, x0) == pytest.approx(expect, abs=1e-12)


def test_expected_reward_matches_quadrature():
    prior, post = GaussianSpec(1.0, 3.0), GaussianSpec(-0.5, 1.2)
    f = lambda x: stats.norm.pdf(x, post.mean, post.std) * lmsr_realized_reward(prior, post, x)
    val, _ = integrate.quad(f, -np.inf, np.inf)
    assert lmsr_expected_reward(prior, post) == pytest.approx(val, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(means, variances, means, variances)
def test_expected_reward_nonnegative(m1, v1, m2, v2):
    assert lmsr_expected_reward(GaussianSpec(m1, v1), GaussianSpec(m2, v2)) >= -1e-12


@settings(max_examples=200, deadline=None)
@given(means, variances)
def test_expected_reward_zero_iff_equal(m, v):
    assert lmsr_expected_reward(GaussianSpec(m, v), GaussianSpec(m, v)) == 0.0


def test_quality_term_values():
    assert quality_term(0.5) == pytest.approx(-(0.5 + math.log(0.5)) / 2, abs=1e-15)
    assert quality_term(0.5) == pytest.approx(0.0966, abs=5e-5)
    # small-q series: q**2/4
    assert quality_term(1e-8) == pytest.approx(0.25e-16, rel=1e-6)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10_000), means, means, qualities)
def test_immediate_reward_identity(t, x, y, q):
    """The split reward equals KL(posterior || prior) with prior N(x, t), posterior N(y, (1-q)t)."""
    state = MarketState(t=t, x_t=x, y_t=y, q=q)
    r = expert_immediate_reward(state)
    kl = lmsr_expected_reward(GaussianSpec(x, t), GaussianSpec(y, (1 - q) * t))
    assert r.total == pytest.approx(kl, rel=1e-12, abs=1e-12)
    assert r.quality_term > 0


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10_000), means, means, qualities)
def test_policy_reward_at_stop_value_is_immediate_reward(t, x, y, q):
    state = MarketState(t=t, x_t=x, y_t=y, q=q)
    s = canonical_state(state).s
    assert expert_policy_reward(state, s * s / t) == pytest.approx(expert_immediate_reward(state).total,
                                                                   rel=1e-12, abs=1e-12)


def test_canonical_state():
    cs = canonical_state(MarketState(t=4, x_t=1.0, y_t=2.0, q=0.25))
    assert cs == CanonicalState(t=4, s=2.0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 1000), st.floats(0, 10), qualities, st.floats(0, 30), st.floats(0, 5))
def test_should_predict_monotone_in_deviation(t, d, q, theta, extra):
    a = should_predict(MarketState(t=t, x_t=0.0, y_t=d, q=q), theta)
    b = should_predict(MarketState(t=t, x_t=0.0, y_t=d + extra, q=q), theta)
    assert b or not a


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 1000), st.floats(-10, 10), st.floats(-10, 10), qualities, st.floats(0, 30))
def test_should_predict_matches_canonical_threshold(t, x, y, q, theta):
    state = MarketState(t=t, x_t=x, y_t=y, q=q)
    s = canonical_state(state).s
    if abs(abs(s) - theta) > 1e-9 * max(1.0, theta):
        assert should_predict(state, theta) == (abs(s) >= theta)


def test_should_predict_tie_predicts():
    q, theta = 0.5, 2.0
    state = MarketState(t=5, x_t=0.0, y_t=math.sqrt(q) * theta, q=q)
    assert should_predict(state, theta)
    assert should_predict(MarketState(t=1, x_t=0.0, y_t=0.0, q=q), 0.0)


def test_normal_ccdf_against_scipy():
    x = np.linspace(-8, 30, 500)
    np.testing.assert_allclose(normal_ccdf(x), stats.norm.sf(x), rtol=1e-12, atol=1e-300)


def test_tail_sandwich_on_grid():
    lams = np.round(np.arange(0, 601) * 0.01, 10)
    for lam in lams:
        lo, hi = normal_tail_bounds(float(lam))
        p = 2 * stats.norm.sf(lam)
        assert lo < p <= hi + 1e-15, lam


def test_tail_bounds_reject_negative():
    with pytest.raises(DomainError):
        normal_tail_bounds(-0.1)
