"""Reproducible synthetic instances.

Families: ``uniform`` (clients and facilities uniform in the unit cube),
``planted`` (Gaussian blobs, one facility at each blob center),
``adversarial`` (planted, but every blob's nearest facility is small and a
slightly farther one is large) and ``graph`` (shortest-path metric of a
random weighted graph). Clients get point ids 0..n-1, facilities follow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .instance import Instance, InstanceError, make_instance

FAMILIES = ("uniform", "planted", "adversarial", "graph")
CAPACITY_MODES = ("tight", "generous", "uniform", "random")


@dataclass
class GenSpec:
    family: str = "uniform"
    n: int = 20
    m: int = 5
    k: int = 2
    d: int = 2
    objective: str = "median"
    capacity: str = "uniform"
    integer: bool = False
    spread: float = 0.05
    colocated: bool = False  # facilities at the client points (continuous use)
    seed: int = 0

    def check(self) -> None:
        if self.family not in FAMILIES:
            raise InstanceError(f"unknown family {self.family!r}")
        if self.capacity not in CAPACITY_MODES:
            raise InstanceError(f"unknown capacity mode {self.capacity!r}")
        if self.objective not in ("median", "means"):
            raise InstanceError(f"unknown objective {self.objective!r}")
        if self.n < 1 or self.d < 1:
            raise InstanceError("n and d must be positive")
        m = self.n if self.colocated else self.m
        if not 1 <= self.k <= m:
            raise InstanceError("need 1 <= k <= number of facilities")
        if self.family in ("planted", "adversarial") and not self.colocated:
            need = self.k if self.family == "planted" else 2 * self.k
            if self.m < need:
                raise InstanceError(f"{self.family} family needs at least {need} facilities")

    def to_dict(self) -> dict:
        return asdict(self)


def capacities(mode: str, n: int, m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Facility capacities for ``n`` clients.

    tight: sum equals n. generous: n each. uniform: ceil(n/k) each.
    random: integers in [ceil(n/(2k)), ceil(2n/k)], topped up so the k
    largest cover n.
    """
    if mode == "tight":
        caps = np.full(m, n // m, dtype=np.int64)
        caps[: n % m] += 1
        if np.any(caps == 0):
            raise InstanceError("tight capacities need at least as many clients as facilities")
        return caps
    if mode == "generous":
        return np.full(m, n, dtype=np.int64)
    if mode == "uniform":
        return np.full(m, math.ceil(n / k), dtype=np.int64)
    lo, hi = math.ceil(n / (2 * k)), max(math.ceil(2 * n / k), math.ceil(n / (2 * k)))
    caps = rng.integers(lo, hi + 1, size=m).astype(np.int64)
    top = np.argsort(-caps, kind="stable")[:k]
    short = n - int(caps[top].sum())
    if short > 0:
        caps[top[0]] += short
    return caps


def _points(rng, count, d, integer):
    if integer:
        return rng.integers(0, 100, size=(count, d)).astype(float)
    return rng.random((count, d))


def _blobs(spec: GenSpec, rng):
    centers = rng.random((spec.k, spec.d))
    label = rng.integers(0, spec.k, size=spec.n)
    pts = np.clip(centers[label] + spec.spread * rng.standard_normal((spec.n, spec.d)), 0, 1)
    if spec.integer:
        pts, centers = np.round(pts * 100), np.round(centers * 100)
    return pts, centers


def generate(spec: GenSpec) -> Instance:
    spec.check()
    rng = np.random.default_rng([spec.seed, FAMILIES.index(spec.family)])
    n, k, d = spec.n, spec.k, spec.d
    if spec.family == "graph":
        return _graph_instance(spec, rng)
    if spec.family == "uniform":
        clients = _points(rng, n, d, spec.integer)
        fac = _points(rng, spec.m, d, spec.integer)
    else:
        clients, centers = _blobs(spec, rng)
        extra = spec.m - k if spec.family == "planted" else spec.m - 2 * k
        fac = np.vstack([centers, _points(rng, max(extra, 0), d, spec.integer)])
    if spec.colocated:
        coords = clients
        fids = list(range(n))
    else:
        coords = np.vstack([clients, fac])
        fids = list(range(n, n + len(fac)))
    caps = capacities(spec.capacity, n, len(fids), k, rng)

    if spec.family == "adversarial" and not spec.colocated:
        coords, caps, fids = _add_decoys(spec, rng, coords, caps, fids)
    return make_instance(range(n), zip(fids, caps.tolist()), k, spec.objective, coords=coords)


def _add_decoys(spec: GenSpec, rng, coords, caps, fids):
    """Put a capacity-1 facility right next to each blob's own facility."""
    n, k = spec.n, spec.k
    blob_fac = coords[n : n + k]
    offset = spec.spread * 0.5 * rng.standard_normal((k, spec.d))
    decoys = blob_fac + offset
    if spec.integer:
        decoys = np.round(decoys)
    coords = np.vstack([coords, decoys])
    new_ids = list(range(len(fids) + n, len(fids) + n + k))
    # the real blob facilities must jointly cover everyone
    caps = caps.copy()
    need = n - int(caps[:k].sum())
    if need > 0:
        caps[0] += need
    caps = np.concatenate([caps, np.ones(k, dtype=np.int64)])
    return coords, caps, fids + new_ids


def _graph_instance(spec: GenSpec, rng) -> Instance:
    """Shortest-path metric of a random connected graph with integer weights 1..10."""
    n_pts = spec.n + spec.m
    rows, cols = [], []
    order = rng.permutation(n_pts)
    for i in range(1, n_pts):
        rows.append(order[i])
        cols.append(order[rng.integers(0, i)])
    extra = n_pts
    rows.extend(rng.integers(0, n_pts, size=extra).tolist())
    cols.extend(rng.integers(0, n_pts, size=extra).tolist())
    w = rng.integers(1, 11, size=len(rows)).astype(float)
    G = csr_matrix((w, (rows, cols)), shape=(n_pts, n_pts))
    D = shortest_path(G, directed=False)
    np.fill_diagonal(D, 0.0)
    fids = list(range(spec.n, n_pts))
    caps = capacities(spec.capacity, spec.n, spec.m, spec.k, rng)
    return make_instance(range(spec.n), zip(fids, caps.tolist()), spec.k, spec.objective, dist_matrix=D)
