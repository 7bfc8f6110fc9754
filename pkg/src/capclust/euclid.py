"""(1+eps) solvers for Euclidean instances.

Continuous centers (uniform capacities): build a finite candidate pool from
small subsets of the coreset and take the cheapest capacitated k-subset.

Discrete facilities (any capacities): project coreset points and facilities
jointly, lay geometric ring nets around every coreset point, keep the k
largest-capacity facilities of every net cell and search k-subsets of what
is left.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .bicriteria import cost_estimate, k_center_solution
from .coreset import DEFAULT_GAMMA_CONST, WeightedClientSet, coreset_for
from .flow import AssignmentSolution, cap_assign, min_cost_assignment
from .instance import INFEASIBLE, InfeasibleError, Instance, InstanceError
from .nets import DEFAULT_NET_BUDGET, build_ring_nets, filter_top_k_capacity, ring_count
from .projection import DEFAULT_C_JL, project
from .search import best_k_subset

log = logging.getLogger(__name__)

DEFAULT_SUBSET_BUDGET = 128
DEFAULT_CANDIDATE_BUDGET = 2000
DEFAULT_C_S = 1.0
# random sub-subsets of size ceil(2/eps) whose centroids are added per subset
MEANS_SUBSAMPLES = 4


class CapacityError(InstanceError):
    """The continuous solver needs one capacity shared by every center."""


@dataclass
class CandidateCenterSet:
    """Candidate centers: coordinates (continuous) or facility ids (discrete)."""

    points: np.ndarray | None = None
    ids: list | None = None
    meta: dict = field(default_factory=dict)
    best_effort: bool = False

    def __len__(self) -> int:
        return len(self.ids) if self.ids is not None else len(self.points)


def euclid_eps(eps: float) -> float:
    """Coreset accuracy used by both Euclidean solvers."""
    return eps / 4


def _require_coords(inst: Instance) -> None:
    if not inst.is_euclidean:
        raise InstanceError("Euclidean solvers need point coordinates")


def _point_costs(a: np.ndarray, b: np.ndarray, power: int) -> np.ndarray:
    return cdist(a, b, "sqeuclidean") if power == 2 else cdist(a, b)


def _distance_scale(gamma: float, power: int) -> float:
    return gamma if power == 1 else math.sqrt(gamma)


def min_separation(gamma_d: float, n: int, eps: float) -> float:
    """eps * gamma / (n ln n), the smallest distance the solvers resolve."""
    return eps * gamma_d / max(n * math.log(max(n, 2)), 1.0)


def merge_close_points(points: np.ndarray, weights, threshold: float):
    """Fold points within ``threshold`` of an earlier kept point into it.

    Returns ``(kept indices, merged weights)``; weights are summed exactly.
    """
    points = np.asarray(points, dtype=float)
    kept, merged = [], []
    for i, p in enumerate(points):
        if kept:
            d = np.linalg.norm(points[kept] - p, axis=1)
            j = int(np.argmin(d))
            if d[j] <= threshold:
                merged[j] += weights[i]
                continue
        kept.append(i)
        merged.append(weights[i])
    return kept, merged


def scale_grid(gamma_d: float, n: int, eps: float) -> np.ndarray:
    """s = (1+eps)^i over [eps*gamma/(n ln n), gamma], ascending."""
    lo = min_separation(gamma_d, n, eps)
    i0 = math.floor(math.log(lo) / math.log1p(eps))
    i1 = math.ceil(math.log(gamma_d) / math.log1p(eps))
    return np.array([(1 + eps) ** i for i in range(i0, i1 + 1)])


def subset_size(k: int, eps: float, c_s: float = DEFAULT_C_S) -> int:
    """m_s = ceil(c_s * eps^-3 * ln(k/eps))."""
    return max(1, math.ceil(c_s * math.log(k / eps) / eps**3 - 1e-9))


# -- generators -------------------------------------------------------------------


def geometric_median(points: np.ndarray, iters: int = 200, tol: float = 1e-12) -> np.ndarray:
    """Weiszfeld iteration started at the centroid."""
    z = points.mean(axis=0)
    for _ in range(iters):
        d = np.linalg.norm(points - z, axis=1)
        if np.any(d < tol):
            # sitting on a data point: stop if it beats moving off it
            on = d < tol
            rest = points[~on]
            if len(rest) == 0:
                return z
            g = ((rest - z) / d[~on, None]).sum(axis=0)
            if np.linalg.norm(g) <= on.sum():
                return z
            d = np.where(on, tol, d)
        w = 1.0 / d
        z_new = (points * w[:, None]).sum(axis=0) / w.sum()
        if np.linalg.norm(z_new - z) <= tol * (1 + np.linalg.norm(z)):
            return z_new
        z = z_new
    return z


def means_generator(S: np.ndarray, scales: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Centroid of S plus centroids of a few ceil(2/eps)-point sub-samples."""
    out = [S.mean(axis=0)]
    q = math.ceil(2 / eps)
    if q < len(S):
        for _ in range(MEANS_SUBSAMPLES):
            out.append(S[rng.choice(len(S), q, replace=False)].mean(axis=0))
    return np.array(out)


def median_generator(S: np.ndarray, scales: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Geometric median of S plus an axis star of side eps*s/sqrt(d) at nearby scales.

    Only scales within a factor 1+eps of the mean distance of S to its median are used.
    """
    z = geometric_median(S)
    d = S.shape[1]
    out = [z]
    avg = float(np.linalg.norm(S - z, axis=1).mean())
    if avg > 0:
        near = scales[(scales >= avg / (1 + eps)) & (scales <= avg * (1 + eps))]
        eye = np.eye(d)
        for s in near:
            step = eps * s / math.sqrt(d)
            out.extend(z + step * eye)
            out.extend(z - step * eye)
    return np.array(out)


GENERATORS: dict[str, Callable] = {"means": means_generator, "median": median_generator}


def _sample_subsets(points: np.ndarray, m_s: int, budget: int, rng: np.random.Generator) -> list:
    """Seeded subset sample: 3 in 4 are random m_s-subsets of an anchor's
    h nearest points (m_s <= h <= 3 m_s), the rest uniform."""
    n = len(points)
    D = cdist(points, points)
    order = np.argsort(D, axis=1, kind="stable")
    seen, out = set(), []
    tries = 0
    while len(out) < budget and tries < 20 * budget:
        tries += 1
        if len(out) % 4 == 3:
            S = rng.choice(n, m_s, replace=False)
        else:
            anchor = int(rng.integers(n))
            h = int(rng.integers(m_s, min(3 * m_s, n) + 1))
            S = rng.choice(order[anchor, :h], m_s, replace=False)
        key = tuple(sorted(int(x) for x in S))
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def gen_candidates_continuous(
    inst: Instance,
    coreset: WeightedClientSet,
    eps: float,
    generator: str | Callable | None = None,
    seed: int = 0,
    gamma: float | None = None,
    c_s: float = DEFAULT_C_S,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET,
) -> CandidateCenterSet:
    """Coreset points plus generator outputs over m_s-subsets of the coreset.

    All C(|W|, m_s) subsets are used when that count is within
    ``subset_budget``; otherwise that many subsets are sampled and the
    result is flagged best-effort. ``generator`` defaults to the objective's.
    """
    _require_coords(inst)
    if generator is None or isinstance(generator, str):
        generator = GENERATORS[generator or inst.objective]
    if gamma is None:
        gamma = cost_estimate(inst, seed)
    gamma_d = _distance_scale(gamma, inst.power)
    scales = scale_grid(gamma_d, inst.n_points, eps)

    pts = inst.coords[np.asarray(coreset.clients(), dtype=np.int64)]
    kept, _ = merge_close_points(pts, [1] * len(pts), min_separation(gamma_d, inst.n_points, eps))
    base = pts[kept]
    base = base[np.unique(base, axis=0, return_index=True)[1]] if len(base) else base
    m_s = min(subset_size(inst.k, eps, c_s), len(base))
    rng = np.random.default_rng([seed, 0xE0C1])
    total = math.comb(len(base), m_s)
    sampled = total > subset_budget
    if sampled:
        subsets = _sample_subsets(base, m_s, subset_budget, rng)
    else:
        subsets = list(itertools.combinations(range(len(base)), m_s))

    chunks = [base]
    count = len(base)
    truncated = False
    for S in subsets:
        out = generator(base[list(S)], scales, eps, rng)
        if count + len(out) > candidate_budget:
            truncated = True
            break
        chunks.append(out)
        count += len(out)
    cands = np.vstack(chunks)
    # dedupe, keeping first occurrences in generation order
    _, first = np.unique(cands, axis=0, return_index=True)
    cands = cands[np.sort(first)]
    meta = dict(subset_size=m_s, subsets=len(subsets), scales=len(scales), sampled=sampled)
    return CandidateCenterSet(points=cands, meta=meta, best_effort=sampled or truncated)


# -- solvers ----------------------------------------------------------------------


def uniform_capacity(inst: Instance) -> int:
    caps = np.unique(inst.capacities)
    if len(caps) != 1:
        raise CapacityError("continuous centers need uniform capacities")
    return int(caps[0])


def _triples(client_ids, flow) -> list:
    return [
        (int(client_ids[i]), int(j), Fraction(int(flow[i, j])))
        for i, j in zip(*np.nonzero(flow))
    ]


def solve_continuous(
    inst: Instance,
    eps: float = 0.5,
    seed: int = 0,
    budget: int | None = None,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET,
    generator: str | Callable | None = None,
    c_s: float = DEFAULT_C_S,
    gamma_const: float = DEFAULT_GAMMA_CONST,
    beta: float = 2.0,
    bicriteria: str = "auto",
    coreset: WeightedClientSet | None = None,
) -> AssignmentSolution:
    """Capacitated clustering with centers anywhere in R^d.

    Every center gets the instance's (uniform) capacity. ``budget`` caps
    the number of k-subset flow evaluations. The solution's centers are
    indices into ``center_coords``.
    """
    _require_coords(inst)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    eta = uniform_capacity(inst)
    k, n = inst.k, inst.n_clients
    if k * eta < n:
        raise InfeasibleError(f"{k} centers of capacity {eta} cannot serve {n} clients")
    if coreset is None:
        coreset = coreset_for(inst, euclid_eps(eps), seed, gamma_const, beta, bicriteria)
    gamma = cost_estimate(inst, seed, beta)
    cand = gen_candidates_continuous(
        inst, coreset, eps, generator, seed, gamma, c_s, subset_budget, candidate_budget
    )
    pts = cand.points
    if len(pts) < k:
        # too few distinct locations: stack centers on existing ones
        pts = np.vstack([pts, pts[np.arange(k - len(pts)) % len(pts)]])

    ids, nums, r = coreset.scaled()
    cost = _point_costs(inst.coords[ids], pts, inst.power)
    caps = np.full(len(pts), eta * r, dtype=np.int64)
    res = best_k_subset(cost, nums, caps, k, r, max_evaluations=budget, seed=seed)
    if res.subset is None:
        raise InfeasibleError("no feasible candidate k-subset")

    chosen = pts[list(res.subset)]
    clients = np.sort(inst.clients)
    full = _point_costs(inst.coords[clients], chosen, inst.power)
    flow, total = min_cost_assignment(full, np.ones(n, dtype=np.int64), np.full(k, eta))
    sol = AssignmentSolution(
        centers=list(range(k)),
        triples=_triples(clients, flow),
        cost=total,
        feasible=True,
        best_effort=res.best_effort or cand.best_effort,
        center_coords=chosen,
    )
    sol.info.update(
        algo="euclid-cont",
        eps=eps,
        coreset_size=len(coreset),
        coreset_cost=res.cost,
        candidates=len(pts),
        evaluations=res.evaluations,
        gamma=gamma,
        **cand.meta,
    )
    return sol


def discrete_candidates(
    inst: Instance,
    coreset: WeightedClientSet,
    eps: float,
    seed: int = 0,
    gamma: float | None = None,
    c_jl: float = DEFAULT_C_JL,
    net_budget: int = DEFAULT_NET_BUDGET,
) -> CandidateCenterSet:
    """Facilities kept by the per-cell top-k capacity filter over the ring nets."""
    _require_coords(inst)
    if gamma is None:
        gamma = cost_estimate(inst, seed)
    gamma_d = _distance_scale(gamma, inst.power)
    n = inst.n_points
    sep = min_separation(gamma_d, n, eps)
    ids = np.asarray(coreset.clients(), dtype=np.int64)
    kept, _ = merge_close_points(inst.coords[ids], [1] * len(ids), sep)
    reps = inst.coords[ids[kept]]
    fac = inst.coords[inst.facility_ids]
    space = project(np.vstack([reps, fac]), eps, seed, c_jl)
    img = space.images
    net = build_ring_nets(img[: len(reps)], img[len(reps) :], sep, eps, ring_count(n, eps), net_budget)
    V = filter_top_k_capacity(net, inst.capacities, inst.k, ids=inst.facility_ids)
    meta = dict(
        projected_dim=space.m,
        projection_attempts=space.attempts,
        distortion=space.distortion,
        net_points=net.n_net_points(),
        representatives=len(reps),
    )
    return CandidateCenterSet(ids=V, meta=meta)


def solve_discrete(
    inst: Instance,
    eps: float = 0.5,
    seed: int = 0,
    budget: int | None = None,
    net_budget: int = DEFAULT_NET_BUDGET,
    c_jl: float = DEFAULT_C_JL,
    gamma_const: float = DEFAULT_GAMMA_CONST,
    beta: float = 2.0,
    bicriteria: str = "auto",
    coreset: WeightedClientSet | None = None,
) -> AssignmentSolution:
    """Capacitated clustering over the given facilities with per-facility capacities."""
    _require_coords(inst)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    k = inst.k
    if int(np.sort(inst.capacities)[::-1][:k].sum()) < inst.n_clients:
        raise InfeasibleError(f"no {k} facilities can serve {inst.n_clients} clients")
    if coreset is None:
        coreset = coreset_for(inst, euclid_eps(eps), seed, gamma_const, beta, bicriteria)
    gamma = cost_estimate(inst, seed, beta)
    cand = discrete_candidates(inst, coreset, eps, seed, gamma, c_jl, net_budget)

    ids, nums, r = coreset.scaled()

    def search(V):
        cost = inst.cost_matrix(ids, V)
        return best_k_subset(cost, nums, inst.capacity_of(V) * r, k, r, max_evaluations=budget, seed=seed)

    V = list(cand.ids)
    res = search(V)
    if res.subset is None:
        fallback = k_center_solution(inst, seed)
        if fallback is None:
            raise InfeasibleError("no feasible candidate k-subset")
        log.warning("filtered candidates admit no feasible k-subset; adding a k-center solution")
        V = sorted(set(V) | set(fallback.centers))
        res = search(V)
    F = [V[j] for j in res.subset]
    sol = cap_assign(inst, F)
    if sol.cost is INFEASIBLE:
        raise InfeasibleError("chosen centers cannot serve all clients")
    sol.best_effort = res.best_effort
    sol.info.update(
        algo="euclid-disc",
        eps=eps,
        coreset_size=len(coreset),
        coreset_cost=res.cost,
        candidates=len(V),
        evaluations=res.evaluations,
        gamma=gamma,
        **cand.meta,
    )
    return sol
