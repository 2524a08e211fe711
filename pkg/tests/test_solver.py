import math

import numpy as np
import pytest
from scipy import integrate, stats

from expert_timing.errors import CapacityError, DomainError, StateError
from expert_timing.solver import (
    PsiRow,
    SolverConfig,
    capital_psi,
    default_parameters,
    grid_invariant_violations,
    psi_wait,
    second_derivative_diagnostic,
    solve,
)


def psi2_exact(c):
    c = np.asarray(c, dtype=float)
    return np.maximum(c * c / 2, c * c / 4 + 0.5)


def psi3_oracle(c):
    """E[psi_2(2c/3 - sqrt(2/3) Z)] against the standard normal, by quadrature."""
    s = math.sqrt(2 / 3)
    wait, _ = integrate.quad(lambda z: psi2_exact(2 * c / 3 - s * z) * stats.norm.pdf(z), -12, 12,
                             points=[(2 * c / 3 - math.sqrt(2)) / s, (2 * c / 3 + math.sqrt(2)) / s],
                             limit=200)
    return max(c * c / 3, wait)


@pytest.fixture(scope="module")
def fine3():
    return solve(SolverConfig(T=3, gamma=0.002, store_full_grid=True))


def test_default_parameters():
    g, h = default_parameters(100, 0.1)
    lt = math.log(100)
    assert g == pytest.approx(math.sqrt(0.1) / (100 * lt * math.log(lt)))
    assert h == pytest.approx(math.sqrt(6 * math.log(2000)))


@pytest.mark.parametrize("T,eps", [(2, 0.1), (100, 0.0), (100, 1.0)])
def test_default_parameters_domain(T, eps):
    with pytest.raises(DomainError):
        default_parameters(T, eps)


@pytest.mark.parametrize("kw", [dict(T=0), dict(T=5, epsilon=0.0), dict(T=5, epsilon=1.0),
                                dict(T=5, gamma=0.0), dict(T=5, h=-1.0), dict(T=2.5)])
def test_config_domain(kw):
    with pytest.raises(DomainError):
        SolverConfig(**kw)


def test_config_certified_flag():
    assert SolverConfig(T=10).certified
    assert not SolverConfig(T=100, gamma=0.01).certified
    assert not SolverConfig(T=2).certified


def test_capacity_error_before_work():
    with pytest.raises(CapacityError):
        solve(SolverConfig(T=100))


def test_wait_value_from_row_one():
    """psi_2^WAIT(c) = E[(c/2 - Z/sqrt 2)**2] = c**2/4 + 1/2."""
    c = np.linspace(-3, 3, 41)
    exact = c * c / 4 + 0.5
    wide = SolverConfig(T=2, gamma=0.001, h=9.0)
    row1 = PsiRow(t=1, values=np.array([0.0]), gamma=wide.gamma, theta=0.0)
    np.testing.assert_allclose(psi_wait(2, c, row1, 0.0, wide), exact, atol=2e-6)
    # default truncation drops the |Z| > h tail, at most E[psi; |Z| > h] for this integrand
    cfg = SolverConfig(T=2, gamma=0.001)
    h = cfg.h
    tail = 2 * (h * stats.norm.pdf(h) + stats.norm.sf(h)) * (9 / 4 + 1)
    err = exact - psi_wait(2, c, row1, 0.0, cfg)
    assert np.all(err >= -2e-6) and np.all(err <= tail)


def test_psi_wait_domain():
    cfg = SolverConfig(T=3, gamma=0.01)
    row1 = PsiRow(t=1, values=np.array([0.0]), gamma=cfg.gamma, theta=0.0)
    with pytest.raises(DomainError):
        psi_wait(1, 0.0, row1, 0.0, cfg)
    with pytest.raises(DomainError):
        psi_wait(3, 0.0, row1, 0.0, cfg)


def test_row_two_matches_closed_form(fine3):
    row = fine3.row(2)
    np.testing.assert_allclose(row.values, psi2_exact(row.grid), atol=1e-5)
    assert fine3.theta[2] == pytest.approx(math.sqrt(2), abs=fine3.config.gamma)


def test_row_three_matches_quadrature(fine3):
    cs = [0.0, 0.5, 1.0, 1.7, 2.2, 3.0, 4.0]
    got = fine3.psi(3, np.array(cs))
    want = [psi3_oracle(c) for c in cs]
    np.testing.assert_allclose(got, want, atol=5e-5)
    # threshold of row 3: where c**2/3 meets the wait value
    from scipy.optimize import brentq
    s = math.sqrt(2 / 3)

    def gap(c):
        w, _ = integrate.quad(lambda z: psi2_exact(2 * c / 3 - s * z) * stats.norm.pdf(z), -12, 12, limit=200)
        return c * c / 3 - w

    assert fine3.theta[3] == pytest.approx(brentq(gap, 1.0, 4.0), abs=2 * fine3.config.gamma)


def test_psi_is_even(table100):
    c = np.linspace(0, 25, 101)
    for t in (2, 17, 100):
        np.testing.assert_array_equal(table100.psi(t, c), table100.psi(t, -c))


def test_psi_beyond_threshold_is_stop_value(table100):
    for t in (5, 50, 100):
        c = table100.theta[t] + np.array([0.0, 0.3, 5.0])
        np.testing.assert_allclose(table100.psi(t, c), c * c / t, rtol=1e-14)


def test_row_missing_raises(table1000):
    with pytest.raises(StateError):
        table1000.row(10)
    with pytest.raises(StateError):
        table1000.psi(10, 0.0)
    assert table1000.psi(10, 1e3) == pytest.approx(1e5)


def test_capital_psi_recompute(table100):
    for t in (1, 2, 50, 100):
        assert capital_psi(table100, t) == pytest.approx(table100.capital_psi[t], abs=1e-12)
    with pytest.raises(DomainError):
        capital_psi(table100, 101)


def test_psi0_nondecreasing(table100):
    d = np.diff(table100.psi0[1:])
    assert np.all(d >= -table100.error_bound[1:-1])


def test_grid_invariants_clean(table100):
    assert not any(grid_invariant_violations(table100).values())


def test_unrefined_threshold_on_grid():
    tab = solve(SolverConfig(T=20, gamma=0.01, refine_theta=False, store_full_grid=True))
    ref = solve(SolverConfig(T=20, gamma=0.01, refine_theta=True))
    k = tab.theta[2:] / 0.01
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)
    assert np.all(np.abs(tab.theta - ref.theta)[1:] <= 0.01 + 1e-12)
    assert not any(grid_invariant_violations(tab).values())


def test_grid_halving_converges():
    a = solve(SolverConfig(T=50, gamma=0.02))
    b = solve(SolverConfig(T=50, gamma=0.01))
    assert abs(a.capital_psi[50] - b.capital_psi[50]) <= a.error_bound[50]
    assert b.error_bound[50] < a.error_bound[50]


def test_certified_error_budget():
    tab = solve(SolverConfig(T=10))
    assert tab.certified
    assert tab.error_bound[10] == pytest.approx(0.1)
    np.testing.assert_allclose(tab.error_bound[1:], 0.1 * np.arange(1, 11) / 10)


def test_slope_jump_at_two(table100):
    rep = second_derivative_diagnostic(table100, 2)
    # psi_2 has left slope theta/2 and right slope theta at theta = sqrt 2
    assert rep.slope_jump == pytest.approx(math.sqrt(2) / 2, abs=0.05)
    assert rep.passed


def test_diagnostic_needs_t_two(table100):
    with pytest.raises(DomainError):
        second_derivative_diagnostic(table100, 1)


def test_deterministic():
    a = solve(SolverConfig(T=30, gamma=0.01))
    b = solve(SolverConfig(T=30, gamma=0.01))
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.capital_psi, b.capital_psi)
