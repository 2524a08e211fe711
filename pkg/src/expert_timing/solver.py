"""Backward dynamic programming for the canonical stopping problem.

The canonical problem: a standard Gaussian walk ``S_t`` is revealed from
``t = T`` down to ``t = 1`` and stopping at ``t`` pays ``S_t**2 / t``. The
value function ``psi_t(c)`` (expected payoff of optimal play given
``S_t = c``) obeys

    psi_1(c) = c**2
    psi_t(c) = max(c**2 / t, E[psi_{t-1}(a*c - s*Z)]),  Z ~ N(0, 1)

with ``a = (t-1)/t`` and ``s = sqrt((t-1)/t)``. The optimal rule stops as soon
as ``|S_t| >= theta(t)``, where ``theta(t)`` is the smallest ``c >= 0`` at which
stopping is at least as good as waiting.

Rows are stored on the half grid ``c = i * gamma, i >= 0`` (psi is even), and
only up to the first stop-dominant grid point; beyond ``theta`` the function is
exactly ``c**2 / t``. Off-grid reads interpolate linearly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError, StateError
from .model import normal_ccdf

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "PsiRow",
    "PolicyTable",
    "DiagnosticReport",
    "default_parameters",
    "psi_star",
    "psi_wait",
    "solve",
    "capital_psi",
    "second_derivative_diagnostic",
    "grid_invariant_violations",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)

# grid widths coarser than this are never derived automatically
MAX_DERIVED_GAMMA = 0.01
# rough ceiling on integrand evaluations for one solve (minutes of numpy time)
MAX_WORK = 5e10
# ceiling on bytes kept when every row is stored
MAX_GRID_BYTES = 2 * 1024**3
# extra grid steps past the t*sqrt(psi_t(0)) envelope before forcing a stop
_ENVELOPE_MARGIN = 8


def default_parameters(T: int, epsilon: float) -> tuple[float, float]:
    """Grid width and truncation bound that certify an ``epsilon`` approximation.

    ``gamma = sqrt(eps) / (T log T log log T)`` and ``h = sqrt(6 log(2T / eps))``.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if T < 3:
        raise DomainError(f"T must be >= 3 so that log log T > 0, got {T}")
    lt = math.log(T)
    gamma = math.sqrt(epsilon) / (T * lt * math.log(lt))
    return gamma, truncation_bound(T, epsilon)


def truncation_bound(T: int, epsilon: float) -> float:
    return math.sqrt(6.0 * math.log(2.0 * T / epsilon))


@dataclass(frozen=True)
class SolverConfig:
    """Solver parameters.

    ``gamma`` and ``h`` are derived from ``(T, epsilon)`` when left as None.
    The derived width is the certified one, capped at ``MAX_DERIVED_GAMMA``
    (the certified formula is very coarse for small T and undefined for
    T < 3). A grid is *certified* when ``T >= 3`` and both ``gamma`` and ``h``
    are at least as fine as the certified values; otherwise the reported
    error is a heuristic estimate.
    """

    T: int
    epsilon: float = 0.1
    gamma: float | None = None
    h: float | None = None
    refine_theta: bool = True
    store_full_grid: bool = False

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise DomainError(f"T must be a positive integer, got {self.T}")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.gamma is None:
            g = MAX_DERIVED_GAMMA
            if self.T >= 3:
                g = min(g, default_parameters(self.T, self.epsilon)[0])
            object.__setattr__(self, "gamma", g)
        if self.h is None:
            object.__setattr__(self, "h", truncation_bound(self.T, self.epsilon))
        if not self.gamma > 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if not self.h > 0:
            raise DomainError(f"h must be > 0, got {self.h}")
        object.__setattr__(self, "T", int(self.T))

    @property
    def certified(self) -> bool:
        if self.T < 3:
            return False
        g, h = default_parameters(self.T, self.epsilon)
        return self.gamma <= g * (1 + 1e-12) and self.h >= h * (1 - 1e-12)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "h": self.h,
            "refine_theta": self.refine_theta,
            "store_full_grid": self.store_full_grid,
        }


@dataclass(frozen=True)
class PsiRow:
    """``psi_t`` on ``c = i * gamma`` for ``i = 0 .. len(values) - 1``.

    The last entry is the first grid point where stopping dominates, so it
    equals ``(i * gamma)**2 / t``. ``theta`` may sit strictly between the last
    two grid points when it was refined.
    """

    t: int
    values: np.ndarray
    gamma: float
    theta: float

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.gamma


@dataclass
class PolicyTable:
    """Solver output. Per-t arrays have length ``T + 1`` and are indexed by t;
    slot 0 is unused (NaN)."""

    T: int
    theta: np.ndarray
    psi0: np.ndarray
    capital_psi: np.ndarray
    config: SolverConfig
    error_bound: np.ndarray
    rows: dict[int, PsiRow] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.config.certified

    @property
    def accumulated_error_bound(self) -> float:
        return float(self.error_bound[self.T])

    def row(self, t: int) -> PsiRow:
        if t not in self.rows:
            raise StateError(
                f"row t={t} was not stored; solve with store_full_grid=True "
                f"(stored rows: {sorted(self.rows)})"
            )
        return self.rows[t]

    def psi(self, t: int, c):
        """``psi_t(c)``; needs the stored row unless every ``|c| >= theta(t)``."""
        c = np.asarray(c, dtype=float)
        theta = float(self.theta[t])
        if t in self.rows:
            return psi_star(self.rows[t], theta, c)
        if np.all(np.abs(c) >= theta):
            out = c * c / t
            return float(out) if out.ndim == 0 else out
        return psi_star(self.row(t), theta, c)


def _interp_values(row: PsiRow, theta_t: float) -> np.ndarray:
    """Row values with the last node adjusted so that plain uniform linear
    interpolation runs through ``(theta, theta**2 / t)`` on the final cell."""
    v = np.asarray(row.values, dtype=float)
    j = len(v) - 1
    if j < 1:
        return v
    lo = (j - 1) * row.gamma
    span = theta_t - lo
    if span <= 0 or abs(span - row.gamma) <= 1e-15 * row.gamma:
        return v
    v = v.copy()
    target = theta_t * theta_t / row.t
    v[j] = v[j - 1] + (target - v[j - 1]) * row.gamma / span
    return v


def _psi_star_array(vals: np.ndarray, t: int, gamma: float, theta_t: float, b: np.ndarray) -> np.ndarray:
    a = np.abs(b)
    stop = a * a / t
    if len(vals) < 2:
        return stop
    u = a / gamma
    i = np.minimum(u.astype(np.int64), len(vals) - 2)
    lo = vals[i]
    interp = lo + (u - i) * (vals[i + 1] - lo)
    return np.where(a < theta_t, interp, stop)


def psi_star(row: PsiRow, theta_t: float, c):
    """Read ``psi_t`` at arbitrary ``c``: interpolated grid value inside the
    threshold, ``c**2 / t`` at or beyond it. Even in ``c``."""
    vals = _interp_values(row, theta_t)
    out = _psi_star_array(vals, row.t, row.gamma, theta_t, np.asarray(c, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _nodes(gamma: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Rectangle nodes ``x_i = i * gamma`` on ``[-h, h]`` and their weights."""
    n = int(math.floor(h / gamma + 1e-9))
    x = np.arange(-n, n + 1) * gamma
    w = gamma * np.exp(-0.5 * x * x) / SQRT_2PI
    return x, w


@njit(cache=True)
def _wait_sums(cs, a, sx, w, vals, t_prev, gamma, theta, out):
    # same arithmetic as _psi_star_array, fused so no (c, x) matrix is built
    last = len(vals) - 2
    for k in range(len(cs)):
        ac = a * cs[k]
        acc = 0.0
        for i in range(len(sx)):
            b = abs(ac - sx[i])
            if b < theta:
                u = b / gamma
                j = min(int(u), last)
                p = vals[j] + (u - j) * (vals[j + 1] - vals[j])
            else:
                p = b * b / t_prev
            acc += w[i] * p
        out[k] = acc


class _WaitKernel:
    """Evaluates the waiting value at time t against a frozen previous row."""

    def __init__(self, t: int, prev: PsiRow, prev_theta: float, gamma: float, h: float):
        self.t = t
        self.a = (t - 1) / t
        self.s = math.sqrt((t - 1) / t)
        self.prev = prev
        self.prev_theta = prev_theta
        self.gamma = gamma
        self.vals = _interp_values(prev, prev_theta)
        self.x, self.w = _nodes(gamma, h)
        self.sx = self.s * self.x

    def __call__(self, c) -> np.ndarray:
        c = np.ascontiguousarray(np.atleast_1d(np.asarray(c, dtype=float)))
        out = np.empty(len(c))
        _wait_sums(c, self.a, self.sx, self.w, self.vals, float(self.prev.t),
                   self.prev.gamma, self.prev_theta, out)
        return out


def psi_wait(t: int, c, prev: PsiRow, prev_theta: float, cfg: SolverConfig):
    """Rectangle-rule value of waiting one more period from ``S_t = c``.

    Sums ``phi(x_i) * psi_{t-1}(a c - s x_i) * gamma`` over ``x_i = i * gamma``
    in ``[-h, h]``, reading ``psi_{t-1}`` through :func:`psi_star`.
    """
    if t < 2:
        raise DomainError(f"waiting is only defined for t >= 2, got {t}")
    if prev.t != t - 1:
        raise DomainError(f"previous row has t={prev.t}, expected {t - 1}")
    kernel = _WaitKernel(t, prev, prev_theta, cfg.gamma, cfg.h)
    out = kernel(np.abs(np.asarray(c, dtype=float)).ravel()).reshape(np.shape(c))
    return float(out) if out.ndim == 0 else out


def _capital_psi_from_row(row: PsiRow, theta_t: float, gamma: float, h: float) -> float:
    x, w = _nodes(gamma, h)
    vals = _interp_values(row, theta_t)
    psi = _psi_star_array(vals, row.t, row.gamma, theta_t, x * math.sqrt(row.t))
    return float(psi @ w)


def _second_differences(row: PsiRow, theta_t: float, extra: int = 3):
    """Central second differences of ``psi_t`` on ``c = i * gamma``, ``i = 0..``,
    running ``extra`` steps into the stop region. Returns ``(c, d2, smooth)``
    where ``smooth`` is False for stencils that straddle ``theta``: psi has a
    slope jump there and no second derivative."""
    g = row.gamma
    n = max(len(row.values), int(math.ceil(theta_t / g)) + 1) + extra
    c = np.arange(-1, n + 1) * g
    psi = psi_star(row, theta_t, c)
    d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / g**2
    cc = c[1:-1]
    smooth = ~((cc - g < theta_t) & (cc + g > theta_t))
    if theta_t == 0:
        smooth[:] = True
    return cc, d2, smooth


def _slope_jump(row: PsiRow, theta_t: float) -> float:
    """Left/right slope mismatch of psi at theta, from one-sided differences."""
    if theta_t == 0 or len(row.values) < 3:
        return 0.0
    g = row.gamma
    left = psi_star(row, theta_t, np.array([theta_t - 2 * g, theta_t - g]))
    return max(0.0, 2 * theta_t / row.t - (left[1] - left[0]) / g)


def _tail_error(t: int, c: float, prev_theta: float, h: float) -> float:
    """Mass dropped by truncating the waiting integral to ``[-h, h]``.

    Uses the majorant ``psi_{t-1}(b) <= (b**2 + theta(t-1)**2) / (t-1)``
    integrated exactly over ``|x| > h``.
    """
    a = (t - 1) / t
    s2 = (t - 1) / t
    tail0 = 2.0 * float(normal_ccdf(h))
    tail2 = 2.0 * (h * math.exp(-0.5 * h * h) / SQRT_2PI + float(normal_ccdf(h)))
    return ((a * a * c * c + prev_theta**2) * tail0 + s2 * tail2) / (t - 1)


def _step_error(t: int, theta_t: float, prev: PsiRow, prev_theta: float, gamma: float, h: float) -> float:
    """Heuristic per-period error: tail + rectangle + interpolation, the last
    two split into the smooth part and the kink at +-theta(t-1)."""
    _, d2, smooth = _second_differences(prev, prev_theta)
    k = float(np.max(np.abs(d2[smooth])))
    s = math.sqrt((t - 1) / t)
    rect = (2.0 * h) * gamma**2 * s * s * k / (12.0 * SQRT_2PI)
    interp = gamma**2 * k / 8.0
    # slope jump D inside one cell: trapezoid error <= D gamma**2 s / 8 and
    # interpolation error <= D gamma / 8 on average over x-width gamma / s;
    # both kinks (+-theta) with s <= 1 give at most D gamma**2 / (2 sqrt(2 pi))
    kink = _slope_jump(prev, prev_theta) * gamma**2 / (2.0 * SQRT_2PI)
    return _tail_error(t, theta_t, prev_theta, h) + rect + interp + kink


def _estimate_work(cfg: SolverConfig) -> tuple[float, float]:
    """(integrand evaluations, bytes for stored rows), assuming theta(t)**2/t <= 8."""
    nx = 2 * math.floor(cfg.h / cfg.gamma) + 1
    points = (2.0 / 3.0) * math.sqrt(8.0) * cfg.T**1.5 / cfg.gamma + cfg.T
    stored = points if cfg.store_full_grid else math.sqrt(8.0 * cfg.T) / cfg.gamma
    return points * nx, 8.0 * stored


def solve(cfg: SolverConfig) -> PolicyTable:
    """Compute ``theta(t)``, ``psi_t(0)`` and ``Psi(t)`` for ``t = 1..T``.

    For each t the grid is swept upward from ``c = 0``; the sweep ends at the
    first grid point where stopping is at least as good as waiting, and that
    point is ``theta(t)`` (optionally refined by bisection to ``gamma / 16``).
    """
    work, nbytes = _estimate_work(cfg)
    if work > MAX_WORK or nbytes > MAX_GRID_BYTES:
        raise CapacityError(
            f"grid too fine for T={cfg.T}: gamma={cfg.gamma:.3g}, h={cfg.h:.3g} needs "
            f"~{work:.3g} integrand evaluations (limit {MAX_WORK:.3g}) and "
            f"~{nbytes / 2**20:.1f} MiB of rows (limit {MAX_GRID_BYTES / 2**20:.0f} MiB); "
            f"pass a coarser gamma"
        )
    T, gamma, h = cfg.T, cfg.gamma, cfg.h
    theta = np.full(T + 1, np.nan)
    psi0 = np.full(T + 1, np.nan)
    cpsi = np.full(T + 1, np.nan)
    err = np.full(T + 1, np.nan)
    rows: dict[int, PsiRow] = {}

    row = PsiRow(t=1, values=np.zeros(1), gamma=gamma, theta=0.0)
    theta[1], psi0[1] = 0.0, 0.0
    cpsi[1] = _capital_psi_from_row(row, 0.0, gamma, h)
    acc = 0.0
    err[1] = _psi_tail(1, 0.0, h)
    if cfg.store_full_grid or T == 1:
        rows[1] = row

    for t in range(2, T + 1):
        prev, prev_theta = row, float(theta[t - 1])
        kernel = _WaitKernel(t, prev, prev_theta, gamma, h)
        values, th = _sweep(kernel, t, gamma, prev_theta, cfg.refine_theta)
        row = PsiRow(t=t, values=values, gamma=gamma, theta=th)
        theta[t], psi0[t] = th, values[0]
        cpsi[t] = _capital_psi_from_row(row, th, gamma, h)
        if cfg.certified:
            err[t] = cfg.epsilon * t / T
        else:
            acc += _step_error(t, th, prev, prev_theta, gamma, h)
            err[t] = acc + _psi_tail(t, th, h)
        if cfg.store_full_grid or t == T:
            rows[t] = row

    if cfg.certified:
        err[1] = cfg.epsilon / T
    return PolicyTable(T=T, theta=theta, psi0=psi0, capital_psi=cpsi, config=cfg,
                       error_bound=err, rows=rows)


def _psi_tail(t: int, theta_t: float, h: float) -> float:
    # mass of the Psi(t) integral beyond |x| > h, with psi_t(c) <= (c**2 + theta**2)/t
    tail0 = 2.0 * float(normal_ccdf(h))
    tail2 = 2.0 * (h * math.exp(-0.5 * h * h) / SQRT_2PI + float(normal_ccdf(h)))
    return tail2 + theta_t**2 / t * tail0


def _sweep(kernel: _WaitKernel, t: int, gamma: float, prev_theta: float, refine: bool):
    vals: list[np.ndarray] = []
    j0 = 0
    chunk = int(1.25 * prev_theta / gamma) + 64
    limit = None
    while True:
        js = np.arange(j0, j0 + chunk)
        cs = js * gamma
        wait = kernel(cs)
        if limit is None:
            # envelope: theta(t) <= t * sqrt(psi_t(0))
            limit = int(math.ceil(t * math.sqrt(max(wait[0], 0.0)) / gamma)) + _ENVELOPE_MARGIN
        stop = cs * cs / t
        hit = np.flatnonzero(stop >= wait)
        if hit.size or js[-1] >= limit:
            k = int(hit[0]) if hit.size else int(min(limit - j0, len(js) - 1))
            if not hit.size:
                logger.warning("t=%d: sweep reached the envelope without a stop point; "
                               "forcing theta=%g", t, cs[k])
            vals.append(np.maximum(wait[: k + 1], stop[: k + 1]))
            break
        vals.append(wait)
        j0 += chunk
        chunk *= 2
    values = np.concatenate(vals)
    j = len(values) - 1
    values[j] = (j * gamma) ** 2 / t
    th = j * gamma
    if refine and j >= 1:
        lo, hi = (j - 1) * gamma, th
        while hi - lo > gamma / 16:
            mid = 0.5 * (lo + hi)
            if mid * mid / t >= kernel(mid)[0]:
                hi = mid
            else:
                lo = mid
        th = hi
    return values, th


def capital_psi(table: PolicyTable, t: int) -> float:
    """``Psi(t) = E[psi_t(sqrt(t) Z)]`` by the rectangle rule on ``[-h, h]``."""
    if not 1 <= t <= table.T:
        raise DomainError(f"t must lie in [1, {table.T}], got {t}")
    if t in table.rows:
        cfg = table.config
        return _capital_psi_from_row(table.rows[t], float(table.theta[t]), cfg.gamma, cfg.h)
    return float(table.capital_psi[t])


@dataclass(frozen=True)
class DiagnosticReport:
    t: int
    theta: float
    lower: float
    upper: float
    tol: float
    n_points: int
    fraction_within: float
    stop_region_max_deviation: float
    stop_region_tol: float
    slope_jump: float
    max_abs_second_derivative: float
    conjecture_ratio: float

    @property
    def passed(self) -> bool:
        return (self.fraction_within == 1.0
                and self.stop_region_max_deviation <= self.stop_region_tol)


def second_derivative_diagnostic(table: PolicyTable, t: int, tol: float | None = None) -> DiagnosticReport:
    """Finite-difference ``psi_t''`` against ``(-theta(t)**2/t, (3 + theta(t-1)**2)/t)``.

    Stencils straddling ``theta(t)`` are left out of the bound check: psi is
    only piecewise differentiable there, and the size of its slope jump is
    reported instead. ``conjecture_ratio`` is ``max|psi''| * t / log log t``
    over the smooth points (NaN for t < 3); it is for inspection only.
    """
    if t < 2:
        raise DomainError(f"diagnostic needs t >= 2, got {t}")
    row = table.row(t)
    g = row.gamma
    th = float(table.theta[t])
    tol = 10.0 * g if tol is None else tol
    lower = -th * th / t
    upper = (3.0 + float(table.theta[t - 1]) ** 2) / t

    cc, d2, smooth = _second_differences(row, th, extra=12)
    d2s = d2[smooth]
    within = (d2s >= lower - tol) & (d2s <= upper + tol)

    stop_mask = cc >= th + 2 * g
    dev = float(np.max(np.abs(d2[stop_mask] - 2.0 / t))) if stop_mask.any() else 0.0
    scale = max(1.0, float(cc[-1]) ** 2 / t)
    stop_tol = 64 * np.finfo(float).eps * scale / g**2
    maxabs = float(np.max(np.abs(d2s)))
    ratio = maxabs * t / math.log(math.log(t)) if t >= 3 else float("nan")
    return DiagnosticReport(t=t, theta=th, lower=lower, upper=upper, tol=tol,
                            n_points=int(len(d2s)), fraction_within=float(within.mean()),
                            stop_region_max_deviation=dev, stop_region_tol=stop_tol,
                            slope_jump=_slope_jump(row, th),
                            max_abs_second_derivative=maxabs, conjecture_ratio=ratio)


def grid_invariant_violations(table: PolicyTable, mono_tol: float = 1e-9) -> dict[str, int]:
    """Count violations of the structural properties of every stored row.

    Keys: ``above_stop`` (psi >= c**2/t), ``excess_nonincreasing``
    (psi - c**2/t non-increasing in c, up to ``mono_tol``), ``slope``
    (discrete slope <= 2(c + gamma)/t + 10 gamma/t), ``envelope``
    (theta <= t sqrt(psi_t(0))), ``psi0_below_stop`` (psi_t(0) <= theta**2/t
    for t >= 2) and ``theta_positive`` (theta(1) = 0, theta(t) > 0 after).
    """
    out = dict.fromkeys(["above_stop", "excess_nonincreasing", "slope", "envelope",
                         "psi0_below_stop", "theta_positive"], 0)
    for t, row in sorted(table.rows.items()):
        c = row.grid
        v = row.values
        out["above_stop"] += int(np.sum(v < c * c / t - 1e-12))
        excess = v - c * c / t
        out["excess_nonincreasing"] += int(np.sum(np.diff(excess) > mono_tol))
        slope = np.abs(np.diff(v)) / row.gamma
        bound = 2 * (c[:-1] + row.gamma) / t + 10 * row.gamma / t
        out["slope"] += int(np.sum(slope > bound))
    ts = np.arange(1, table.T + 1)
    th = table.theta[1:]
    p0 = table.psi0[1:]
    # theta is only resolved to the bisection bracket (or one grid step), and
    # the envelope is attained with equality at t = 2
    res = table.config.gamma / 16 if table.config.refine_theta else table.config.gamma
    out["envelope"] = int(np.sum(th > ts * np.sqrt(p0) + res))
    out["psi0_below_stop"] = int(np.sum((p0 > th * th / ts + 1e-12)[1:]))
    out["theta_positive"] = int(th[0] != 0) + int(np.sum(~(th[1:] > 0)))
    return out
