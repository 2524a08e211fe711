"""Closed-form bounds on the optimal canonical reward ``Psi(T)``.

``Psi(T)`` grows like ``2 log log T``. The upper bound holds for any
``eps > 0`` once ``T > 10``; the lower bound for ``0 < eps < 1/2`` once
``T > 16``. Neither is tight at desk-scale horizons: the lower bound is
typically vacuous (negative) there, and it is returned as such.

``T`` may be any real > 1 here (the asymptotic regimes of interest, e.g.
``T = e**100``, do not fit in an integer-indexed solver anyway).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "UPPER_EPS_GRID",
    "LOWER_EPS_GRID",
    "BoundReport",
    "gamma1",
    "gamma1_simplified",
    "gamma2",
    "psi_upper_bound",
    "psi_lower_bound",
    "best_upper_bound",
    "best_lower_bound",
    "corollary_envelope",
    "theta_envelope",
    "bound_report",
]

UPPER_EPS_GRID = np.round(np.arange(1, 61) * 0.05, 10)
LOWER_EPS_GRID = np.round(np.arange(1, 50) * 0.01, 10)


def _loglog(T: float) -> float:
    return math.log(math.log(T))


def _check_upper(T: float, eps: float) -> None:
    if not T > 10:
        raise DomainError(f"upper bound needs T > 10, got {T}")
    if not eps > 0:
        raise DomainError(f"upper bound needs eps > 0, got {eps}")


def _check_lower(T: float, eps: float) -> None:
    if not T > 16:
        raise DomainError(f"lower bound needs T > 16, got {T}")
    if not 0 < eps < 0.5:
        raise DomainError(f"lower bound needs 0 < eps < 1/2, got {eps}")


def gamma1(T: float, eps: float) -> float:
    """Correction term of the upper bound.

    ``12 / (log(1 + (sqrt(1+eps) - sqrt(1+eps/2))**2 / (1+eps/2)) * (log T)**(eps/2))``
    """
    _check_upper(T, eps)
    # sqrt(1+e) - sqrt(1+e/2) written without cancellation
    diff = (eps / 2) / (math.sqrt(1 + eps) + math.sqrt(1 + eps / 2))
    log_a = math.log1p(diff * diff / (1 + eps / 2))
    return 12.0 / (log_a * math.log(T) ** (eps / 2))


def gamma1_simplified(T: float, eps: float) -> float:
    """``(96 / eps**2) (log T)**(-eps/2)``, a closed-form simplification of
    :func:`gamma1` on ``eps in (0, 1]``, kept for cross-checking.

    Note that it is *not* an upper bound on :func:`gamma1`: the log argument
    is about ``eps**2 / 16`` for small eps, so ``gamma1 ~ 192 / eps**2``
    times the same power of ``log T``.
    """
    _check_upper(T, eps)
    return 96.0 / eps**2 / math.log(T) ** (eps / 2)


def gamma2(T: float, eps: float) -> float:
    """Failure probability of the lower bound; lies in (0, 2)."""
    _check_lower(T, eps)
    lt = math.log(T)
    llt = math.log(lt)
    denom = ((1 - eps / 8) * math.sqrt(2 * llt) + 2) * math.log(20 / eps**2)
    return math.exp(-lt ** (eps / 4 - eps**2 / 64) / denom) + lt ** (-eps / 8)


def psi_upper_bound(T: float, eps: float) -> float:
    """``(1 + eps) 2 log log T + gamma1(T, eps)``, valid for every eps > 0."""
    _check_upper(T, eps)
    return (1 + eps) * 2 * _loglog(T) + gamma1(T, eps)


def psi_lower_bound(T: float, eps: float) -> float:
    """``(1 - gamma2) (1 - eps) 2 log log T``; may be negative (vacuous)."""
    _check_lower(T, eps)
    return (1 - gamma2(T, eps)) * (1 - eps) * 2 * _loglog(T)


def best_upper_bound(T: float, eps_grid=UPPER_EPS_GRID) -> tuple[float, float]:
    """Minimum of :func:`psi_upper_bound` over ``eps_grid``, with its argmin."""
    vals = [psi_upper_bound(T, float(e)) for e in eps_grid]
    k = int(np.argmin(vals))
    return vals[k], float(eps_grid[k])


def best_lower_bound(T: float, eps_grid=LOWER_EPS_GRID) -> tuple[float, float]:
    """Maximum of :func:`psi_lower_bound` over ``eps_grid``, with its argmax."""
    vals = [psi_lower_bound(T, float(e)) for e in eps_grid]
    k = int(np.argmax(vals))
    return vals[k], float(eps_grid[k])


def _loglog_of(T: float | None, log_T: float | None) -> float:
    if log_T is not None:
        if not log_T > 1:
            raise DomainError(f"log T must be > 1, got {log_T}")
        return math.log(log_T)
    if not T > math.e:
        raise DomainError(f"T must be > e, got {T}")
    return _loglog(T)


def corollary_envelope(T: float | None = None, *, log_T: float | None = None) -> tuple[float, float]:
    """``2 llT - 32 lllT - 8 <= Psi(T) <= 2 llT + 8 lllT + 6`` for ``log log T >= 4``.

    Pass ``log_T`` instead of ``T`` when T itself overflows a float.
    """
    llt = _loglog_of(T, log_T)
    if not llt >= 4:
        raise DomainError(f"envelope needs log log T >= 4 (T >= e**e**4 ~ 5.1e23), got log log T={llt:.4g}")
    lllt = math.log(llt)
    return 2 * llt - 32 * lllt - 8, 2 * llt + 8 * lllt + 6


def theta_envelope(t: int, T: float | None = None, psi0_t: float | None = None, *,
                   log_T: float | None = None) -> tuple[float, str]:
    """Upper bound on ``theta(t)``.

    For ``log log T >= 35`` this is the closed form ``t sqrt(3 log log T)``
    (branch ``"corollary"``). Such T overflow a float, so give ``log_T``
    there. Otherwise it is ``t sqrt(psi_t(0))``, which needs the solver's
    ``psi0_t`` (branch ``"solver"``); without it the result is ``inf``
    (branch ``"needs_psi0"``).
    """
    log_t_max = math.log(T) if log_T is None else log_T
    if t < 1 or math.log(t) > log_t_max:
        raise DomainError(f"t must lie in [1, T], got t={t}")
    if log_t_max > 1 and math.log(log_t_max) >= 35:
        return t * math.sqrt(3 * math.log(log_t_max)), "corollary"
    if psi0_t is None:
        return math.inf, "needs_psi0"
    return t * math.sqrt(psi0_t), "solver"


@dataclass(frozen=True)
class BoundReport:
    T: float
    epsilon: float
    upper: float | None
    lower: float | None
    gamma1: float | None
    gamma2: float | None
    corollary_upper: float | None
    corollary_lower: float | None
    admissible_upper: bool
    admissible_lower: bool
    admissible_corollary: bool


def bound_report(T: float, eps: float) -> BoundReport:
    """Every bound at ``(T, eps)``; inadmissible entries are None."""
    adm_u = T > 10 and eps > 0
    adm_l = T > 16 and 0 < eps < 0.5
    adm_c = T > math.e and _loglog(T) >= 4
    cl, cu = corollary_envelope(T) if adm_c else (None, None)
    return BoundReport(
        T=T,
        epsilon=eps,
        upper=psi_upper_bound(T, eps) if adm_u else None,
        lower=psi_lower_bound(T, eps) if adm_l else None,
        gamma1=gamma1(T, eps) if adm_u else None,
        gamma2=gamma2(T, eps) if adm_l else None,
        corollary_upper=cu,
        corollary_lower=cl,
        admissible_upper=adm_u,
        admissible_lower=adm_l,
        admissible_corollary=adm_c,
    )
