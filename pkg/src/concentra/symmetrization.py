"""Hinge-moment domination, tail transfer and the square-root variational identity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import ExpTail
from .errors import DomainError


@dataclass(frozen=True)
class EmpiricalSample:
    """Finite-support law: atoms ``values`` with optional probability ``weights``."""

    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", v)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != v.shape:
                raise DomainError("weights and values differ in length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise DomainError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def probs(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.values.size, 1.0 / self.values.size)
        return self.weights

    def mean(self) -> float:
        return float(self.probs @ self.values)

    def tail(self, t: float) -> float:
        """P(X >= t)."""
        return float(self.probs[self.values >= t].sum())


def _check(sample: EmpiricalSample):
    if sample.values.size == 0:
        raise DomainError("sample is empty")


def hinge_moment(sample: EmpiricalSample, a: float) -> float:
    _check(sample)
    return float(sample.probs @ np.maximum(sample.values - a, 0.0))


def breakpoint_grid(*samples: EmpiricalSample) -> np.ndarray:
    """All atoms of the given samples; hinge moments are linear between them."""
    return np.unique(np.concatenate([s.values for s in samples]))


def hinge_dominates(xi: EmpiricalSample, nu: EmpiricalSample, a_grid=None, tol: float = 1e-12):
    """Check E(xi - a)_+ <= E(nu - a)_+ on ``a_grid``.

    Returns ``(holds, worst_gap)`` with ``worst_gap = max_a [E(xi-a)_+ - E(nu-a)_+]``.
    With the default grid (every atom of both laws) the check is exact for all real a.
    """
    _check(xi)
    _check(nu)
    grid = breakpoint_grid(xi, nu) if a_grid is None else np.asarray(a_grid, dtype=float).ravel()
    if grid.size == 0:
        raise DomainError("a_grid is empty")
    hx = np.maximum(xi.values[None, :] - grid[:, None], 0.0) @ xi.probs
    hn = np.maximum(nu.values[None, :] - grid[:, None], 0.0) @ nu.probs
    gap = float(np.max(hx - hn))
    return gap <= tol, gap


def transfer_tail(cert: ExpTail) -> ExpTail:
    """Tail of the dominated variable: same rate, constant multiplied by e."""
    if cert.gamma_factor < 1:
        raise DomainError(f"tail transfer needs gamma_factor >= 1, got {cert.gamma_factor}")
    return ExpTail(cert.gamma_factor * math.e, cert.rate)


def tail_certificate(nu: EmpiricalSample, rate: float) -> ExpTail:
    """Smallest Gamma >= 1 with P(nu >= t) <= Gamma e^{-rate t} for all t >= 0.

    On each gap between atoms the tail is constant while e^{rate t} grows, so the
    supremum over t >= 0 is attained at t = 0 or at a nonnegative atom.
    """
    _check(nu)
    if not rate > 0:
        raise DomainError("rate must be positive")
    pts = np.unique(np.concatenate([[0.0], nu.values[nu.values >= 0]]))
    ratios = [nu.tail(t) * math.exp(rate * t) for t in pts]
    return ExpTail(max(1.0, max(ratios)), rate)


def sqrt_variational(a: float, b: float) -> tuple[float, float]:
    """inf_{delta>0} (delta a + b / (4 delta)) = sqrt(ab); returns (value, argmin)."""
    if a < 0 or b < 0:
        raise DomainError("a and b must be nonnegative")
    if a == 0:
        return 0.0, math.inf
    return math.sqrt(a * b), math.sqrt(b) / (2.0 * math.sqrt(a))


def normalized_statistic(xi1: float, xi2: float, xi3: float) -> float:
    """sup_{delta>0} 4 delta (xi1 - xi2 - delta xi3) = (xi1 - xi2)_+^2 / xi3."""
    if not xi3 > 0:
        raise DomainError(f"xi3 must be positive, got {xi3}")
    c = max(xi1 - xi2, 0.0)
    return c * c / xi3
