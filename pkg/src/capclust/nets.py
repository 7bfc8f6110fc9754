"""Ring nets around coreset points and per-cell top-k capacity filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_NET_BUDGET = 200_000


class NetBudgetError(RuntimeError):
    """Raised when the nets need more points than the configured budget."""


@dataclass
class RingNet:
    """Nets keyed by ``(coreset point index, ring index)``.

    ``nets[key]`` lists candidate indices chosen as net points;
    ``cells[key]`` maps each net point to the candidates in its Voronoi cell.
    Ring 0 is the inner ball of radius ``base``; ring i >= 1 is the shell
    base(1+eps)^(i-1) < d <= base(1+eps)^i with net resolution eps*base(1+eps)^i.
    """

    base: float
    eps: float
    n_rings: int
    nets: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)

    def resolution(self, ring: int) -> float:
        return self.eps * self.base * (1 + self.eps) ** ring

    def n_net_points(self) -> int:
        return sum(len(v) for v in self.nets.values())


def ring_count(n: int, eps: float) -> int:
    """Rings needed to reach past any relevant distance: ceil(2 ln(n ln n / eps) / ln(1+eps))."""
    n_log_n = max(n * math.log(max(n, 2)), 1.0)
    return max(1, math.ceil(2 * math.log(n_log_n / eps) / math.log1p(eps)))


def ring_index(d: np.ndarray, base: float, eps: float) -> np.ndarray:
    """Smallest i >= 0 with d <= base (1+eps)^i."""
    with np.errstate(divide="ignore"):
        i = np.ceil(np.log(np.maximum(d, 0) / base) / math.log1p(eps))
    i = np.where(np.isfinite(i), i, 0)
    i = np.maximum(i, 0).astype(np.int64)
    # exact edge repair against the closed outer radius
    radius = base * (1 + eps) ** i
    i = np.where(d > radius, i + 1, i)
    lower = base * (1 + eps) ** np.maximum(i - 1, 0)
    i = np.where((i > 0) & (d <= lower), i - 1, i)
    return i


def greedy_net(points: np.ndarray, resolution: float) -> list[int]:
    """Farthest-point net: every point ends within ``resolution`` of a chosen one.

    Starts from index 0; returns indices into ``points``.
    """
    if len(points) == 0:
        return []
    chosen = [0]
    gap = np.linalg.norm(points - points[0], axis=1)
    while True:
        far = int(np.argmax(gap))
        if gap[far] <= resolution:
            return chosen
        chosen.append(far)
        gap = np.minimum(gap, np.linalg.norm(points - points[far], axis=1))


def build_ring_nets(
    coreset_points: np.ndarray,
    candidates: np.ndarray,
    base: float,
    eps: float,
    n_rings: int,
    budget: int = DEFAULT_NET_BUDGET,
) -> RingNet:
    """Nets over the candidates in every ring around every coreset point.

    Each candidate in a ring joins the cell of its nearest net point
    (ties: earliest net point). Candidates beyond ring ``n_rings`` are left out.
    """
    if not base > 0:
        raise ValueError("base radius must be positive")
    coreset_points = np.atleast_2d(np.asarray(coreset_points, dtype=float))
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    net = RingNet(base, eps, n_rings)
    if len(candidates) == 0:
        return net
    D = cdist(coreset_points, candidates)
    used = 0
    for p, row in enumerate(D):
        rings = ring_index(row, base, eps)
        for i in np.unique(rings):
            if i > n_rings:
                continue
            members = np.flatnonzero(rings == i)
            local = greedy_net(candidates[members], net.resolution(int(i)))
            used += len(local)
            if used > budget:
                raise NetBudgetError(f"net budget exceeded ({budget} net points)")
            net_pts = members[local]
            near = cdist(candidates[members], candidates[net_pts]).argmin(axis=1)
            key = (p, int(i))
            net.nets[key] = net_pts.tolist()
            net.cells[key] = {int(q): members[near == j].tolist() for j, q in enumerate(net_pts)}
    return net


def filter_top_k_capacity(net: RingNet, capacities, k: int, ids=None) -> list:
    """Union over all cells of the k highest-capacity candidates (ties: lowest id).

    ``capacities`` and the optional ``ids`` are indexed by candidate index;
    the result is a sorted list of ids (candidate indices if ``ids`` is None).
    """
    capacities = np.asarray(capacities)
    ids = np.arange(len(capacities)) if ids is None else np.asarray(ids)
    keep = set()
    for cells in net.cells.values():
        for members in cells.values():
            ranked = sorted(members, key=lambda q: (-capacities[q], ids[q]))
            keep.update(int(ids[q]) for q in ranked[:k])
    return sorted(keep)
