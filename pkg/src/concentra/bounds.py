"""Closed-form evaluators for the tail bounds, deviation radii and constants.

Every function is pure. Probability bounds are returned unclamped (values
above 1 are legal); use :func:`clamp` when reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

LOG2 = math.log(2.0)
SQRT_LOG2 = math.sqrt(LOG2)


@dataclass(frozen=True)
class ExpTail:
    """Tail certificate P(X >= t) <= gamma_factor * exp(-rate * t)."""

    gamma_factor: float
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"rate must be positive, got {self.rate}")
        if not self.gamma_factor > 0:
            raise DomainError(f"gamma_factor must be positive, got {self.gamma_factor}")

    def __call__(self, t: float) -> float:
        return self.gamma_factor * math.exp(-self.rate * t)


@dataclass(frozen=True)
class BoundParams:
    ev: float = 1.0
    b: float = 0.5
    t: float = 1.0
    alpha: float = 1.0
    n: int = 2
    d: int = 1
    beta: float = 0.5

    def __post_init__(self):
        for name in ("ev", "b", "t", "alpha"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.n < 1 or self.d < 1:
            raise DomainError("n and d must be positive integers")
        if not 0 < self.beta < 1:
            raise DomainError("beta must lie strictly inside (0, 1)")


def clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def _nonneg(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise DomainError(f"{k} must be nonnegative, got {v}")


def thm1_bound(alpha: float, t: float) -> float:
    """2^(alpha+1) * exp(1 - alpha t / (alpha + 1))."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    _nonneg(t=t)
    return 2.0 ** (alpha + 1.0) * math.exp(1.0 - alpha * t / (alpha + 1.0))


def _sqrt_gap_bound(t: float, level: float) -> float:
    return math.exp(1.0 - (math.sqrt(t) - math.sqrt(level)) ** 2)


def thm1_optimized(t: float) -> float:
    """Closed form of thm1_bound optimized over alpha, valid for t >= log 2."""
    if not t >= LOG2:
        raise DomainError(f"optimized bound needs t >= log 2, got {t}")
    return 2.0 * _sqrt_gap_bound(t, LOG2)


def golden_section(func, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500):
    """Minimize a unimodal ``func`` on [lo, hi]; returns (argmin, min)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = func(d)
    x = c if fc <= fd else d
    return x, func(x)


def _log_thm1(alpha: float, t: float) -> float:
    return (alpha + 1.0) * LOG2 + 1.0 - alpha * t / (alpha + 1.0)


def thm1_exact_min(t: float, lo: float = 1e-6, hi: float = 1e6, tol: float = 1e-10):
    """Numerically minimize thm1_bound(alpha, t) over alpha; returns (value, alpha*)."""
    _nonneg(t=t)
    a_star, log_val = golden_section(lambda a: _log_thm1(a, t), lo, hi, tol)
    return math.exp(log_val), a_star


def h_poisson(x: float) -> float:
    return (1.0 + x) * math.log1p(x) - x


def poisson_tail(ev: float, r: float) -> float:
    """exp(-EV h(r / EV)), the Poisson-type tail of the uniform variance."""
    if not ev > 0:
        raise DomainError(f"ev must be positive, got {ev}")
    _nonneg(r=r)
    return math.exp(-ev * h_poisson(r / ev))


def bernstein_tail(ev: float, r: float) -> float:
    if not ev > 0:
        raise DomainError(f"ev must be positive, got {ev}")
    _nonneg(r=r)
    return math.exp(-r * r / (2.0 * ev + 2.0 * r / 3.0))


def variance_radius(ev: float, b: float, t: float) -> float:
    """Deviation r with P(V >= EV + r) <= exp(-t) for values in [-b, b]."""
    _nonneg(ev=ev, t=t)
    if not b > 0:
        raise DomainError(f"b must be positive, got {b}")
    return (2.0 * b / 3.0) * math.sqrt(18.0 * ev * t + 4.0 * b * b * t * t) + 4.0 * b * b * t / 3.0


def cor2_radius(ev: float, b: float, t: float) -> float:
    return 2.0 * math.sqrt(t * (ev + variance_radius(ev, b, t)))


def cor2_rhs(t: float) -> float:
    if not t >= LOG2:
        raise DomainError(f"two-sided tail bound needs t >= log 2, got {t}")
    return 4.0 * _sqrt_gap_bound(t, LOG2) + math.exp(-t)


def massart_radius(ev: float, b: float, t: float) -> float:
    _nonneg(ev=ev, b=b, t=t)
    return 2.0 * math.sqrt(1.35 * ev * t) + 3.5 * b * t


def haussler_packing_bound(d: int, u: float) -> float:
    """e (d+1) (2e/u^2)^d, a uniform packing bound for VC-subgraph classes."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if not u > 0:
        raise DomainError(f"u must be positive, got {u}")
    return math.e * (d + 1) * (2.0 * math.e / (u * u)) ** d


def cor4_radius(d: int, n: int, t: float, K: float) -> float:
    if n < 2:
        raise DomainError(f"n must be >= 2 so that log n > 0, got {n}")
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    _nonneg(t=t, K=K)
    return K * math.sqrt(d * math.log(n) / n) + math.sqrt(t / n)


def solved_radius(U: float, var_sum: float) -> float:
    """2U sqrt(var_sum / (1 - 4U^2)): the deviation radius after solving for |Q_n f|."""
    _nonneg(U=U, var_sum=var_sum)
    if not U < 0.5:
        raise DomainError(f"solving for the deviation needs U < 1/2, got {U}")
    return 2.0 * U * math.sqrt(var_sum / (1.0 - 4.0 * U * U))


def eb_radius(var_sum: float, n: int, t: float) -> float:
    """2 sqrt(var_sum t / (n - 4t)); var_sum is Var + Var_n."""
    _nonneg(var_sum=var_sum)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not t < n / 4.0:
        raise DomainError(f"need t < n/4 (n={n}, t={t})")
    return 2.0 * math.sqrt(var_sum * t / (n - 4.0 * t))


def vc_optimistic_radius(d: int, n: int, t: float) -> float:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if d > n:
        raise DomainError(f"need d <= n (d={d}, n={n})")
    _nonneg(t=t)
    return 2.0 * math.sqrt(d / n * math.log(2.0 * math.e * n / d) + t / n)


def thm2_rhs(t: float, beta: float) -> float:
    if not 0 < beta < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    level = math.log(1.0 / beta)
    if not t >= level:
        raise DomainError(f"need t >= log(1/beta) = {level}, got {t}")
    return _sqrt_gap_bound(t, level)


# --- K(beta) ---------------------------------------------------------------

_ZETA_TERMS = 1_000_000


@lru_cache(maxsize=1)
def _log_j() -> np.ndarray:
    return np.log(np.arange(2, _ZETA_TERMS + 1, dtype=np.float64))


def zeta_tail_bounds(p: float) -> tuple[float, float]:
    """Certified (lower, upper) bracket for sum_{j>=2} j^(-p), p > 1.

    Partial sum to N plus the integral comparison
    (N+1)^(1-p)/(p-1) <= sum_{j>N} j^(-p) <= N^(1-p)/(p-1).
    """
    if not p > 1:
        return math.inf, math.inf
    partial = float(np.exp(-p * _log_j()).sum())
    N = float(_ZETA_TERMS)
    lo = partial + (N + 1.0) ** (1.0 - p) / (p - 1.0)
    hi = partial + N ** (1.0 - p) / (p - 1.0)
    # float summation error of the partial sum is far below 1e-12
    return lo, hi


@lru_cache(maxsize=64)
def k_beta(beta: float, tol: float = 1e-10) -> tuple[float, float]:
    """Return (p, K) with sum_{j>=2} j^-p < 1 - beta certified and K = 8 sqrt(p + 2)."""
    if not 0 < beta < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    target = 1.0 - beta
    lo, hi = 1.0, 2.0
    while zeta_tail_bounds(hi)[1] >= target:
        lo, hi = hi, 2.0 * hi
    # invariant: upper bound at hi is < target, sum at lo is >= target (or diverges)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if zeta_tail_bounds(mid)[1] < target:
            hi = mid
        else:
            lo = mid
    return hi, 8.0 * math.sqrt(hi + 2.0)
