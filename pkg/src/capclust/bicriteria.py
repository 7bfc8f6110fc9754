"""Bicriteria starting solutions and the cost estimate used by the solvers.

A provider opens about beta*k facilities, assigns clients by min-cost flow
and reports the cost. The default greedy provider seeds centers by D / D^2
sampling (the objective's power), takes the highest-capacity facility among
near-duplicates of the sampled client's nearest facility, then improves by
single swaps. For small facility sets the best subset is found exactly instead.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import AssignmentSolution, cap_assign
from .instance import InfeasibleError, Instance
from .search import best_k_subset

log = logging.getLogger(__name__)

EXACT_SUBSET_LIMIT = 10_000
LOCAL_SEARCH_ROUNDS = 50
# facilities within this factor of the nearest one count as near-duplicates
NEAR_DUPLICATE_FACTOR = 1.25


@dataclass
class BicriteriaSolution:
    centers: list
    assignment: AssignmentSolution
    cost: float
    provider: str = "greedy"


def n_bicriteria_centers(inst: Instance, beta: float) -> int:
    return max(1, min(len(inst.facility_ids), int(math.floor(beta * inst.k))))


def bicriteria_solve(inst: Instance, beta: float = 2.0, seed=0, provider: str = "auto") -> BicriteriaSolution:
    """Feasible solution with floor(beta*k) open facilities.

    ``provider`` is ``auto`` (exact when at most 10^4 subsets, else greedy),
    ``greedy``, ``exact`` or ``file:<path>`` naming a JSON list of facility
    ids (or a solution file with a ``centers`` field).
    """
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if int(inst.capacities.sum()) < inst.n_clients:
        raise InfeasibleError("total capacity is below the number of clients")
    m = n_bicriteria_centers(inst, beta)
    if provider.startswith("file:"):
        return _from_file(inst, provider[5:])
    if provider == "auto":
        provider = "exact" if math.comb(len(inst.facility_ids), m) <= EXACT_SUBSET_LIMIT else "greedy"
    if provider == "exact" and _top_capacity(inst, m) >= inst.n_clients:
        fids = np.sort(inst.facility_ids)
        res = best_k_subset(
            inst.cost_matrix(inst.clients, fids),
            np.ones(inst.n_clients, dtype=np.int64),
            inst.capacity_of(fids),
            m,
        )
        centers = [int(fids[j]) for j in res.subset]
        sol = cap_assign(inst, centers)
        return BicriteriaSolution(centers, sol, sol.cost, "exact")
    if provider not in ("greedy", "exact"):
        raise ValueError(f"unknown bicriteria provider {provider!r}")
    return _greedy(inst, m, seed)


def _top_capacity(inst: Instance, m: int) -> int:
    return int(np.sort(inst.capacities)[::-1][:m].sum())


def _from_file(inst: Instance, path: str) -> BicriteriaSolution:
    data = json.loads(Path(path).read_text())
    centers = data["centers"] if isinstance(data, dict) else data
    sol = cap_assign(inst, centers)
    if not sol.feasible:
        raise InfeasibleError(f"centers from {path} cannot serve all clients")
    return BicriteriaSolution(list(sol.centers), sol, sol.cost, "file")


def _greedy(inst: Instance, m: int, seed) -> BicriteriaSolution:
    rng = np.random.default_rng(seed)
    fids = inst.facility_ids
    caps = inst.capacities
    D = inst.dist(inst.clients, fids)
    n = inst.n_clients
    opened: list[int] = []  # indices into fids
    closest = np.full(n, np.inf)

    while len(opened) < m:
        weights = np.where(np.isfinite(closest), closest**inst.power, 1.0)
        total = weights.sum()
        if n == 0 or total <= 0:
            _open_by_capacity(opened, caps, m)
            break
        c = rng.choice(n, p=weights / total)
        row = np.where(np.isin(np.arange(len(fids)), opened), np.inf, D[c])
        nearest = row.min()
        near = np.flatnonzero(row <= nearest * NEAR_DUPLICATE_FACTOR)
        pick = int(near[np.lexsort((fids[near], -caps[near]))[0]])
        opened.append(pick)
        closest = np.minimum(closest, D[:, pick])

    _repair_capacity(opened, caps, n, m)
    F = [int(fids[i]) for i in opened]
    sol = cap_assign(inst, F)
    sol = _local_search(inst, sol)
    return BicriteriaSolution(list(sol.centers), sol, sol.cost, "greedy")


def _open_by_capacity(opened, caps, m):
    for i in np.lexsort((np.arange(len(caps)), -caps)):
        if len(opened) >= m:
            break
        if int(i) not in opened:
            opened.append(int(i))


def _repair_capacity(opened, caps, n_clients, m):
    closed = [i for i in range(len(caps)) if i not in opened]
    while sum(int(caps[i]) for i in opened) < n_clients and closed:
        low = min(opened, key=lambda i: (caps[i], i))
        high = max(closed, key=lambda i: (caps[i], -i))
        if caps[high] > caps[low]:
            opened[opened.index(low)] = high
            closed[closed.index(high)] = low
        else:
            break
    while sum(int(caps[i]) for i in opened) < n_clients and closed:
        high = max(closed, key=lambda i: (caps[i], -i))
        closed.remove(high)
        opened.append(high)
        log.warning("opened more than %d centers to reach feasibility", m)


def _local_search(inst: Instance, sol: AssignmentSolution, rounds: int = LOCAL_SEARCH_ROUNDS) -> AssignmentSolution:
    all_f = sorted(inst.facility_ids.tolist())
    need = inst.n_clients
    for _ in range(rounds):
        current = list(sol.centers)
        best = sol
        closed = [f for f in all_f if f not in current]
        for out in current:
            for inn in closed:
                F = sorted([f for f in current if f != out] + [inn])
                if int(inst.capacity_of(F).sum()) < need:
                    continue
                cand = cap_assign(inst, F)
                if cand.feasible and cand.cost < best.cost * (1 - 1e-12):
                    best = cand
        if best is sol:
            break
        sol = best
    return sol


def cost_estimate(inst: Instance, seed=0, beta: float = 2.0) -> float:
    """Positive upper bound on OPT: cost of a feasible k-center solution.

    Falls back to n times the beta*k bicriteria cost when no
    k facilities have enough total capacity.
    """
    if int(inst.capacities.sum()) < inst.n_clients:
        raise InfeasibleError("total capacity is below the number of clients")
    if _top_capacity(inst, inst.k) >= inst.n_clients:
        gamma = _greedy(inst, inst.k, seed).cost
    else:
        gamma = bicriteria_solve(inst, beta, seed).cost * max(inst.n_points, 1)
    if gamma > 0:
        return float(gamma)
    D = inst.dist(inst.clients, inst.facility_ids)
    pos = D[D > 0]
    if pos.size == 0:
        return 1.0
    return float(pos.min() ** inst.power)


def k_center_solution(inst: Instance, seed=0) -> AssignmentSolution | None:
    """The feasible k-center solution behind cost_estimate, or None."""
    if _top_capacity(inst, inst.k) < inst.n_clients:
        return None
    return _greedy(inst, inst.k, seed).assignment
