"""Seeded Monte Carlo for the canonical walk and the full market/expert model.

A walk is built from ``T`` i.i.d. N(0, 1) increments ``Z_1..Z_T`` with
``S_t = Z_1 + ... + Z_t``. ``t`` counts periods *remaining*, so the observer
sees ``S_T`` first and ``S_1`` last; policies scan in that order.

Randomness is keyed by ``(seed, stream)`` through ``numpy.random.SeedSequence``.
Bulk runs draw paths in fixed blocks of ``BLOCK_SIZE``, block ``k`` from
stream ``k``, so results do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .bounds import gamma2
from .errors import CapacityError, DomainError
from .model import GaussianSpec, MarketState, expert_policy_reward, lmsr_realized_reward, should_predict
from .solver import PolicyTable

__all__ = [
    "BLOCK_SIZE",
    "MAX_DRAWS",
    "WalkPath",
    "ScenarioPath",
    "OptimalTable",
    "FixedLIL",
    "ImmediateStop",
    "FinalStop",
    "Hindsight",
    "SimResult",
    "rng_for",
    "sample_walk",
    "sample_walks",
    "iter_walk_blocks",
    "stop_times",
    "run_policy",
    "monte_carlo",
    "tail_fractions",
    "hindsight_fraction_above",
    "martingale_crossover",
    "empirical_conditional_mean",
    "sample_scenario",
    "ScenarioReport",
    "expert_scenario",
]

BLOCK_SIZE = 4096
# total normal draws one call may request
MAX_DRAWS = 2_000_000_000


def rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class WalkPath:
    """One canonical walk; ``s[t - 1] = S_t`` for ``t = 1..T``."""

    T: int
    s: np.ndarray

    def at(self, t: int) -> float:
        return float(self.s[t - 1])

    def observed(self) -> np.ndarray:
        """Values in the order they are revealed: ``S_T, S_{T-1}, ..., S_1``."""
        return self.s[::-1]


def sample_walks(T: int, n: int, seed: int, stream: int) -> np.ndarray:
    """``(n, T)`` array of walks; row ``i`` column ``t - 1`` holds ``S_t``."""
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")
    z = rng_for(seed, stream).standard_normal((n, T))
    return np.cumsum(z, axis=1)


def sample_walk(T: int, seed: int, stream: int) -> WalkPath:
    """A single walk; identical to row 0 of ``sample_walks(T, n, seed, stream)``."""
    return WalkPath(T=T, s=sample_walks(T, 1, seed, stream)[0])


def iter_walk_blocks(T: int, n: int, seed: int):
    """Yield ``(first_path_id, block)`` covering ``n`` paths in fixed-size blocks."""
    if n * T > MAX_DRAWS:
        raise CapacityError(f"n * T = {n * T:.3g} normal draws exceeds the limit {MAX_DRAWS:.3g}")
    for k, start in enumerate(range(0, n, BLOCK_SIZE)):
        yield start, sample_walks(T, min(BLOCK_SIZE, n - start), seed, k)


# --- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class OptimalTable:
    """Stop at the first t (from T down) with ``|S_t| >= theta(t)``."""

    table: PolicyTable = field(repr=False)
    name: str = "optimal"

    def triggers(self, S: np.ndarray) -> np.ndarray:
        T = S.shape[1]
        if T > self.table.T:
            raise DomainError(f"policy table covers T={self.table.T}, walk has T={T}")
        return np.abs(S) >= self.table.theta[1:T + 1]


@dataclass(frozen=True)
class FixedLIL:
    """Stop once ``S_t**2 / t >= (1 - eps) 2 log log T``, with T the walk length."""

    epsilon: float = 0.2

    @property
    def name(self) -> str:
        return f"lil({self.epsilon:g})"

    def threshold(self, T: int) -> float:
        if T < 16:
            raise DomainError(f"FixedLIL needs T >= 16, got {T}")
        return (1 - self.epsilon) * 2 * math.log(math.log(T))

    def triggers(self, S: np.ndarray) -> np.ndarray:
        T = S.shape[1]
        t = np.arange(1, T + 1)
        return S * S / t >= self.threshold(T)


@dataclass(frozen=True)
class ImmediateStop:
    """Stop at the first observation, t = T."""

    name: str = "immediate"

    def triggers(self, S: np.ndarray) -> np.ndarray:
        return np.ones(S.shape, dtype=bool)


@dataclass(frozen=True)
class FinalStop:
    """Wait to the last period, t = 1."""

    name: str = "final"

    def triggers(self, S: np.ndarray) -> np.ndarray:
        return np.zeros(S.shape, dtype=bool)


@dataclass(frozen=True)
class Hindsight:
    """Picks ``argmax_t S_t**2 / t`` after seeing the whole path. Not feasible;
    its reward is ``M_T``."""

    name: str = "hindsight"


def stop_times(S: np.ndarray, policy) -> np.ndarray:
    """Stop time per row of ``S`` (shape ``(n, T)``); 1-based t."""
    T = S.shape[1]
    if isinstance(policy, Hindsight):
        return np.argmax(S * S / np.arange(1, T + 1), axis=1) + 1
    trig = policy.triggers(S)
    # every policy stops at t = 1 if nothing triggered earlier
    trig[:, 0] = True
    # scanning t = T..1 means taking the largest triggered t
    return T - np.argmax(trig[:, ::-1], axis=1)


def _rewards(S: np.ndarray, stop: np.ndarray) -> np.ndarray:
    s = S[np.arange(len(S)), stop - 1]
    return s * s / stop


def run_policy(path: WalkPath, policy) -> tuple[int, float]:
    """``(stop_t, reward)`` of one policy on one path."""
    S = path.s[None, :]
    stop = stop_times(S.copy(), policy)
    return int(stop[0]), float(_rewards(S, stop)[0])


@dataclass
class SimResult:
    policy: str
    n_paths: int
    mean_reward: float
    stderr: float
    mean_stop_time: float
    stop_time_histogram: dict[int, int]
    rewards: np.ndarray | None = field(default=None, repr=False)
    stop_times: np.ndarray | None = field(default=None, repr=False)


def monte_carlo(policies, T: int, n: int, seed: int, keep_paths: bool = False) -> list[SimResult]:
    """Run every policy on the same ``n`` paths (common random numbers)."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    policies = list(policies)
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise DomainError(f"policy names must be distinct, got {names}")
    rewards = {nm: np.empty(n) for nm in names}
    stops = {nm: np.empty(n, dtype=np.int64) for nm in names}
    for start, S in iter_walk_blocks(T, n, seed):
        sl = slice(start, start + len(S))
        for p in policies:
            st = stop_times(S, p)
            stops[p.name][sl] = st
            rewards[p.name][sl] = _rewards(S, st)
    out = []
    for nm in names:
        r, st = rewards[nm], stops[nm]
        uniq, counts = np.unique(st, return_counts=True)
        out.append(SimResult(
            policy=nm,
            n_paths=n,
            mean_reward=float(r.mean()),
            stderr=float(r.std(ddof=1) / math.sqrt(n)),
            mean_stop_time=float(st.mean()),
            stop_time_histogram={int(u): int(c) for u, c in zip(uniq, counts)},
            rewards=r if keep_paths else None,
            stop_times=st if keep_paths else None,
        ))
    return out


def tail_fractions(lams, ts, n: int, seed: int) -> dict[tuple[float, int], float]:
    """Empirical ``Pr[|S_t| >= lam sqrt(t)]`` for every ``(lam, t)`` pair."""
    ts = [int(t) for t in ts]
    T = max(ts)
    hits = Counter()
    for _, S in iter_walk_blocks(T, n, seed):
        for t in ts:
            a = np.abs(S[:, t - 1]) / math.sqrt(t)
            for lam in lams:
                hits[(float(lam), t)] += int(np.count_nonzero(a >= lam))
    return {k: v / n for k, v in hits.items()}


def hindsight_fraction_above(T: int, n: int, seed: int, epsilon: float) -> float:
    """Fraction of paths with ``M_T > 2 (1 - eps) log log T``.

    The domain matches the lower-bound probability ``1 - gamma2(T, eps)`` it
    is compared against.
    """
    gamma2(T, epsilon)  # domain check
    level = 2 * (1 - epsilon) * math.log(math.log(T))
    t = np.arange(1, T + 1)
    above = 0
    for _, S in iter_walk_blocks(T, n, seed):
        above += int(np.count_nonzero(np.max(S * S / t, axis=1) > level))
    return above / n


def martingale_crossover(t: int, c: float) -> tuple[float, int]:
    """``E[S_{t-1}**2 / (t-1) | S_t = c]`` and the sign of its drift over ``c**2/t``.

    ``S_{t-1} | S_t = c ~ N(c (t-1)/t, (t-1)/t)``, so the conditional mean is
    ``c**2 (t-1)/t**2 + 1/t`` and the drift is ``(1 - c**2/t) / t``.
    """
    if t < 2:
        raise DomainError(f"t must be >= 2, got {t}")
    mean = c * c * (t - 1) / t**2 + 1.0 / t
    drift = 1.0 - c * c / t
    # the sign is taken from the exact closed form, not from mean - c**2/t
    sign = 0 if math.isclose(c * c, t, rel_tol=1e-12) else int(np.sign(drift))
    return mean, sign


def empirical_conditional_mean(t: int, c: float, n: int, seed: int) -> tuple[float, float]:
    """Monte Carlo ``E[S_{t-1}**2 / (t-1) | S_t = c]`` with its standard error.

    Walks are pinned to ``S_t = c`` by the bridge construction
    ``S'_tau = S_tau - (tau / t)(S_t - c)``, exact for Gaussian increments.
    """
    if t < 2:
        raise DomainError(f"t must be >= 2, got {t}")
    total = total2 = 0.0
    for _, S in iter_walk_blocks(t, n, seed):
        pinned = S[:, t - 2] - (t - 1) / t * (S[:, t - 1] - c)
        v = pinned * pinned / (t - 1)
        total += float(v.sum())
        total2 += float((v * v).sum())
    mean = total / n
    var = (total2 - n * mean * mean) / (n - 1)
    return mean, math.sqrt(max(var, 0.0) / n)


# --- full market / expert scenarios ---------------------------------------


@dataclass(frozen=True)
class ScenarioPath:
    """Market and expert signals; arrays are indexed ``[t - 1]``."""

    T: int
    q: float
    x0: float
    x: np.ndarray
    y: np.ndarray
    a_steps: np.ndarray
    b_steps: np.ndarray

    def canonical(self) -> np.ndarray:
        return (self.y - self.x) / math.sqrt(self.q)


def _scenario_arrays(T: int, q: float, n: int, rng: np.random.Generator, x0: float):
    a = rng.standard_normal((n, T)) * math.sqrt(q)
    b = rng.standard_normal((n, T)) * math.sqrt(1 - q)
    x = x0 + np.cumsum(a + b, axis=1)
    y = x0 + np.cumsum(b, axis=1)
    return a, b, x, y


def sample_scenario(T: int, q: float, seed: int, stream: int = 0, x0: float = 0.0) -> ScenarioPath:
    """One market/expert path: steps ``A_t ~ N(0, q)`` known to the expert and
    ``B_t ~ N(0, 1 - q)`` unknown to both."""
    MarketState(t=max(T, 1), x_t=0.0, y_t=0.0, q=q)  # domain check
    a, b, x, y = _scenario_arrays(T, q, 1, rng_for(seed, stream), x0)
    return ScenarioPath(T=T, q=q, x0=x0, x=x[0], y=y[0], a_steps=a[0], b_steps=b[0])


@dataclass
class ScenarioReport:
    T: int
    q: float
    n_paths: int
    mean_realized: float
    stderr_realized: float
    mean_expected: float
    stderr_expected: float
    mean_difference: float
    stderr_difference: float
    mean_stop_time: float
    fraction_negative: float
    realized: np.ndarray | None = field(default=None, repr=False)
    expected: np.ndarray | None = field(default=None, repr=False)


def _expert_scenario_block(a, b, x, y, q, x0, table):
    n, T = x.shape
    realized = np.empty(n)
    expected = np.empty(n)
    stops = np.empty(n, dtype=np.int64)
    for i in range(n):
        for t in range(T, 0, -1):
            state = MarketState(t=t, x_t=float(x[i, t - 1]), y_t=float(y[i, t - 1]), q=q)
            if should_predict(state, float(table.theta[t])):
                break
        s = state.deviation / math.sqrt(q)
        prior = GaussianSpec(state.x_t, float(t))
        post = GaussianSpec(state.y_t, (1 - q) * t)
        realized[i] = lmsr_realized_reward(prior, post, x0)
        expected[i] = expert_policy_reward(state, table.psi(t, s))
        stops[i] = t
    return realized, expected, stops


def expert_scenario(T: int, q: float, seed: int, table: PolicyTable, n: int = 1,
                    x0: float = 0.0, keep_paths: bool = False) -> ScenarioReport:
    """Simulate experts who follow the optimal announcement rule.

    At each path's stop time the realized LMSR score (against the true ``x0``)
    and the policy's expected reward at that state are both recorded; their
    means must agree up to Monte Carlo error.
    """
    MarketState(t=1, x_t=0.0, y_t=0.0, q=q)  # domain check
    if table.T < T:
        raise DomainError(f"policy table covers T={table.T}, need {T}")
    if n * T * 2 > MAX_DRAWS:
        raise CapacityError(f"2 n T = {2 * n * T:.3g} draws exceeds the limit {MAX_DRAWS:.3g}")
    realized, expected, stops = [], [], []
    for k, start in enumerate(range(0, n, BLOCK_SIZE)):
        m = min(BLOCK_SIZE, n - start)
        a, b, x, y = _scenario_arrays(T, q, m, rng_for(seed, k), x0)
        r, e, st = _expert_scenario_block_fast(a, b, x, y, q, x0, table)
        realized.append(r)
        expected.append(e)
        stops.append(st)
    r = np.concatenate(realized)
    e = np.concatenate(expected)
    st = np.concatenate(stops)
    d = r - e
    sq = math.sqrt(n) if n > 1 else float("nan")
    ddof = 1 if n > 1 else 0
    return ScenarioReport(
        T=T, q=q, n_paths=n,
        mean_realized=float(r.mean()), stderr_realized=float(r.std(ddof=ddof) / sq),
        mean_expected=float(e.mean()), stderr_expected=float(e.std(ddof=ddof) / sq),
        mean_difference=float(d.mean()), stderr_difference=float(d.std(ddof=ddof) / sq),
        mean_stop_time=float(st.mean()),
        fraction_negative=float(np.mean(r < 0)),
        realized=r if keep_paths else None,
        expected=e if keep_paths else None,
    )


def _expert_scenario_block_fast(a, b, x, y, q, x0, table):
    """Vectorized equivalent of :func:`_expert_scenario_block`."""
    n, T = x.shape
    theta = table.theta[1:T + 1]
    d2 = (y - x) ** 2
    trig = (d2 > theta * theta) | (d2 >= q * theta * theta)
    trig[:, 0] = True
    stop = T - np.argmax(trig[:, ::-1], axis=1)
    idx = np.arange(n)
    xt = x[idx, stop - 1]
    yt = y[idx, stop - 1]
    var_prior = stop.astype(float)
    var_post = (1 - q) * var_prior
    realized = (0.5 * np.log(var_prior / var_post)
                + (x0 - xt) ** 2 / (2 * var_prior)
                - (x0 - yt) ** 2 / (2 * var_post))
    s = (yt - xt) / math.sqrt(q)
    psi = np.empty(n)
    for t in np.unique(stop):
        m = stop == t
        psi[m] = table.psi(int(t), s[m])
    expected = 0.5 * q * psi - 0.5 * (q + math.log1p(-q))
    return realized, expected, stop
