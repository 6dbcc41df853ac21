"""Wolfe's minimum-norm-point algorithm for the convex hull of a finite point set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass
class MinNormResult:
    point: np.ndarray
    weights: np.ndarray  # convex weights over all input points
    gap: float  # min_v <p, v - p>; >= 0 certifies optimality
    iterations: int

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.point @ self.point))


def _affine_min(B: np.ndarray) -> np.ndarray:
    # min |sum mu_i B_i| over sum mu_i = 1
    if len(B) == 1:
        return np.ones(1)
    D = (B[1:] - B[0]).T
    c, *_ = np.linalg.lstsq(D, -B[0], rcond=None)
    return np.concatenate([[1.0 - c.sum()], c])


def min_norm_point(points, tol: float = 1e-12, max_iter: int = 10_000) -> MinNormResult:
    """Minimum-norm point of conv(points).

    Major cycles add the vertex minimizing <x, v>; minor cycles project onto the
    affine hull of the current corral and drop vertices whose weight hits zero.
    Ties go to the smallest index.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or len(P) == 0:
        raise DomainError("need a nonempty (k, n) array of points")
    sq = np.einsum("ij,ij->i", P, P)
    scale = max(1.0, float(sq.max()))
    i0 = int(np.argmin(sq))
    S = [i0]
    lam = np.ones(1)
    x = P[i0].copy()
    it = 0
    for it in range(1, max_iter + 1):
        dots = P @ x
        j = int(np.argmin(dots))
        xx = float(x @ x)
        if xx - dots[j] <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            mu = _affine_min(P[S])
            if np.all(mu > 0):
                lam = mu
                break
            neg = mu <= 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, lam / (lam - mu), np.inf)
            theta = float(min(1.0, np.min(ratios)))
            lam = theta * mu + (1.0 - theta) * lam
            keep = lam > 1e-15
            keep[int(np.argmin(np.where(neg, ratios, np.inf)))] = False
            if not keep.any():
                keep[int(np.argmax(lam))] = True
            S = [s for s, k in zip(S, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[S]
    weights = np.zeros(len(P))
    weights[S] = lam
    gap = float(np.min(P @ x) - x @ x)
    return MinNormResult(point=x, weights=weights, gap=gap, iterations=it)
