"""Seeded Gaussian random projection with measured-distortion retry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

DEFAULT_C_JL = 8.0
MAX_ATTEMPTS = 20


class ProjectionError(RuntimeError):
    """No projection within the distortion bound was found."""


@dataclass
class ProjectedSpace:
    m: int
    matrix: np.ndarray | None  # (d, m); None for the identity map
    images: np.ndarray
    eps: float
    distortion: tuple[float, float]
    attempts: int
    seed: int

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points if self.matrix is None else points @ self.matrix


def target_dim(n: int, eps: float, c_jl: float = DEFAULT_C_JL) -> int:
    return max(1, math.ceil(c_jl * math.log(max(n, 2)) / eps**2 - 1e-9))


def pairwise_distortion(before: np.ndarray, after: np.ndarray) -> tuple[float, float]:
    """Min and max of projected / original distance over all pairs with positive distance."""
    d0 = pdist(before)
    d1 = pdist(after)
    pos = d0 > 0
    if not pos.any():
        return 1.0, 1.0
    ratio = d1[pos] / d0[pos]
    return float(ratio.min()), float(ratio.max())


def project(
    points,
    eps: float,
    seed: int = 0,
    c_jl: float = DEFAULT_C_JL,
    max_attempts: int = MAX_ATTEMPTS,
) -> ProjectedSpace:
    """Linear map to m = ceil(c_jl * ln n / eps^2) dimensions, pairwise distortion in (1-2eps, 1+2eps).

    Identity when m >= d. Otherwise Gaussian matrices scaled by 1/sqrt(m)
    are drawn from (seed, attempt) until one meets the bound.
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    m = target_dim(n, eps, c_jl)
    if m >= d:
        return ProjectedSpace(d, None, points, eps, (1.0, 1.0), 0, seed)
    lo_ok, hi_ok = 1 - 2 * eps, 1 + 2 * eps
    for attempt in range(1, max_attempts + 1):
        rng = np.random.default_rng([seed, attempt])
        G = rng.standard_normal((d, m)) / math.sqrt(m)
        images = points @ G
        lo, hi = pairwise_distortion(points, images)
        if lo > lo_ok and hi < hi_ok:
            return ProjectedSpace(m, G, images, eps, (lo, hi), attempt, seed)
    raise ProjectionError(f"no projection within 1 +/- {2 * eps} after {max_attempts} attempts")
