"""Cross-module consistency checks: solver structure, solver vs Monte Carlo,
closed-form bounds, and concentration.

Each check returns a :class:`Check`; :func:`run_verification` runs the whole
set at one configuration and is what ``expert-timing verify`` prints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import best_lower_bound, best_upper_bound
from .model import normal_tail_bounds
from .simulator import (
    FinalStop,
    FixedLIL,
    Hindsight,
    OptimalTable,
    empirical_conditional_mean,
    martingale_crossover,
    monte_carlo,
    tail_fractions,
)
from .solver import PolicyTable, SolverConfig, grid_invariant_violations, second_derivative_diagnostic, solve

__all__ = [
    "Check",
    "check_threshold_envelope",
    "check_grid_invariants",
    "check_second_derivative",
    "check_dp_mc_agreement",
    "check_policy_ordering",
    "check_tail_sandwich",
    "check_bounds_sandwich",
    "check_martingale_crossover",
    "run_verification",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<22} {self.detail}"


def check_threshold_envelope(table: PolicyTable) -> Check:
    """theta(1) = 0, theta(t) > 0 after, theta <= t sqrt(psi_t(0)) and psi_t(0) <= theta**2/t."""
    v = grid_invariant_violations(PolicyTable(T=table.T, theta=table.theta, psi0=table.psi0,
                                              capital_psi=table.capital_psi, config=table.config,
                                              error_bound=table.error_bound))
    keys = ["theta_positive", "envelope", "psi0_below_stop"]
    bad = {k: v[k] for k in keys}
    return Check("threshold_envelope", not any(bad.values()), f"violations {bad}")


def check_grid_invariants(table: PolicyTable, mono_tol: float = 1e-9) -> Check:
    missing = table.T - sum(1 for t in table.rows if 1 <= t <= table.T)
    if missing:
        return Check("grid_invariants", False, f"{missing} of {table.T} rows not stored; solve with the full grid")
    v = grid_invariant_violations(table, mono_tol=mono_tol)
    return Check("grid_invariants", not any(v.values()), f"rows={len(table.rows)} violations {v}")


def check_second_derivative(table: PolicyTable, ts=(2, 10, 100)) -> Check:
    parts, ok = [], True
    for t in ts:
        if t > table.T or t not in table.rows:
            continue
        r = second_derivative_diagnostic(table, t)
        ok &= r.passed
        parts.append(f"t={t}: {r.fraction_within:.3f} in [{r.lower:.3g}, {r.upper:.3g}]")
    if not parts:
        return Check("second_derivative", False, "no eligible stored rows")
    return Check("second_derivative", ok, "; ".join(parts))


def check_dp_mc_agreement(table: PolicyTable, n: int, seed: int, T: int | None = None) -> Check:
    """|mean reward of the threshold policy - Psi(T)| <= 4 stderr + solver error."""
    T = table.T if T is None else T
    (res,) = monte_carlo([OptimalTable(table)], T, n, seed)
    gap = abs(res.mean_reward - table.capital_psi[T])
    tol = 4 * res.stderr + float(table.error_bound[T])
    return Check("dp_mc_agreement", gap <= tol,
                 f"T={T} mc={res.mean_reward:.5f}+-{res.stderr:.5f} Psi={table.capital_psi[T]:.5f} "
                 f"gap={gap:.5f} tol={tol:.5f}")


def check_policy_ordering(table: PolicyTable, n: int, seed: int, lil_eps: float = 0.2) -> Check:
    """Hindsight >= optimal >= FixedLIL >= FinalStop in mean (3 pooled stderr)
    and hindsight >= optimal on every path."""
    T = table.T
    pols = [Hindsight(), OptimalTable(table), FixedLIL(lil_eps), FinalStop()]
    res = monte_carlo(pols, T, n, seed, keep_paths=True)
    ok = True
    gaps = []
    for hi, lo in zip(res, res[1:]):
        pooled = math.hypot(hi.stderr, lo.stderr)
        gap = hi.mean_reward - lo.mean_reward
        ok &= gap >= -3 * pooled
        gaps.append(f"{hi.policy}-{lo.policy}={gap:+.4f}")
    exceptions = int(np.sum(res[0].rewards < res[1].rewards))
    ok &= exceptions == 0
    return Check("policy_ordering", ok, f"T={T} {' '.join(gaps)} pathwise_exceptions={exceptions}")


def check_tail_sandwich(n: int, seed: int, lams=(0.5, 1.0, 2.0, 3.0), ts=(10, 100)) -> Check:
    frac = tail_fractions(lams, ts, n, seed)
    ok = True
    worst = -math.inf
    for (lam, t), p in frac.items():
        lo, hi = normal_tail_bounds(lam)
        se = math.sqrt(max(p * (1 - p), 1.0 / n) / n)
        ok &= lo - 4 * se < p <= hi + 4 * se
        worst = max(worst, (lo - p) / se, (p - hi) / se)
    return Check("tail_sandwich", ok, f"n={n} cells={len(frac)} worst_excess={worst:+.2f} se")


def check_bounds_sandwich(table: PolicyTable) -> Check:
    T = table.T
    if T <= 10:
        return Check("bounds_sandwich", True, f"T={T}: no admissible bound")
    psi, err = float(table.capital_psi[T]), float(table.error_bound[T])
    up, eu = best_upper_bound(T)
    ok = psi <= up + err
    detail = f"T={T} Psi={psi:.4f} upper={up:.4f}@eps={eu:g}"
    if T > 16:
        lo, el = best_lower_bound(T)
        ok &= psi >= lo - err
        detail += f" lower={lo:.4f}@eps={el:g}" + (" (vacuous)" if lo <= 0 else "")
    return Check("bounds_sandwich", ok, detail)


def check_martingale_crossover(n: int, seed: int, t: int = 10) -> Check:
    ok = True
    for tt in range(2, 30):
        for c in np.linspace(-3 * math.sqrt(tt), 3 * math.sqrt(tt), 25):
            mean, sign = martingale_crossover(tt, float(c))
            expect = 0 if math.isclose(c * c, tt, rel_tol=1e-12) else int(np.sign(1 - c * c / tt))
            ok &= sign == expect
            ok &= math.isclose(mean - c * c / tt, (1 - c * c / tt) / tt, rel_tol=1e-9, abs_tol=1e-12)
    worst = 0.0
    for k, c in enumerate((0.0, math.sqrt(t), 2 * math.sqrt(t))):
        mean, _ = martingale_crossover(t, c)
        emp, se = empirical_conditional_mean(t, c, n, seed + k)
        z = abs(emp - mean) / se
        worst = max(worst, z)
        ok &= z <= 4
    return Check("martingale_crossover", ok, f"closed form on grid; empirical worst |z|={worst:.2f}")


def run_verification(T: int = 100, n: int = 100_000, seed: int = 42, gamma: float | None = 0.01,
                     epsilon: float = 0.1, table: PolicyTable | None = None,
                     tail_n: int | None = None) -> list[Check]:
    """Solve (unless ``table`` is given) and run every check."""
    if table is None:
        table = solve(SolverConfig(T=T, epsilon=epsilon, gamma=gamma, store_full_grid=True))
    checks = [
        check_threshold_envelope(table),
        check_grid_invariants(table),
        check_second_derivative(table, ts=(2, 10, table.T)),
        check_dp_mc_agreement(table, n, seed),
    ]
    if table.T >= 16:
        checks.append(check_policy_ordering(table, n, seed + 1))
    checks += [
        check_tail_sandwich(tail_n or n, seed + 2),
        check_bounds_sandwich(table),
        check_martingale_crossover(n, seed + 3),
    ]
    return checks
