"""Brute-force ground truth for small instances."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .flow import AssignmentSolution, cap_assign
from .instance import INFEASIBLE, Instance

DEFAULT_SUBSET_CAP = 100_000
DEFAULT_MAP_CAP = 10_000_000


class OracleLimitError(RuntimeError):
    """The enumeration would exceed its configured cap."""


@dataclass
class OracleResult:
    centers: list
    cost: object
    evaluations: int
    wall_time: float
    solution: AssignmentSolution | None = None

    @property
    def feasible(self) -> bool:
        return self.cost is not INFEASIBLE


def exact_solve(inst: Instance, k: int | None = None, cap: int = DEFAULT_SUBSET_CAP) -> OracleResult:
    """Global optimum over all k-subsets of facilities, each evaluated by cap_assign.

    Subsets whose total capacity cannot cover the clients are skipped
    without a flow evaluation. Ties keep the lexicographically first subset.
    """
    k = inst.k if k is None else k
    fids = sorted(inst.facility_ids.tolist())
    total = math.comb(len(fids), k)
    if total > cap:
        raise OracleLimitError(f"C({len(fids)}, {k}) = {total} exceeds the cap {cap}")
    start = time.perf_counter()
    need = inst.n_clients
    caps = {f: inst.capacity(f) for f in fids}
    best, best_cost, count = None, INFEASIBLE, 0
    for F in itertools.combinations(fids, k):
        if sum(caps[f] for f in F) < need:
            continue
        count += 1
        sol = cap_assign(inst, F)
        if sol.feasible and (best is None or sol.cost < best_cost):
            best, best_cost = sol, sol.cost
    return OracleResult(
        centers=list(best.centers) if best else [],
        cost=best_cost,
        evaluations=count,
        wall_time=time.perf_counter() - start,
        solution=best,
    )


def exhaustive_assign(inst: Instance, F, cap: int = DEFAULT_MAP_CAP):
    """Minimum cost over every capacity-respecting map of clients to F (INFEASIBLE if none)."""
    F = sorted(int(f) for f in F)
    n, m = inst.n_clients, len(F)
    if m == 0:
        raise ValueError("center set F is empty")
    if m**n > cap:
        raise OracleLimitError(f"{m}^{n} maps exceed the cap {cap}")
    if n == 0:
        return 0.0
    costs = inst.cost_matrix(inst.clients, F)
    caps = inst.capacity_of(F)
    best = INFEASIBLE
    # enumerate maps in chunks of the leading client positions
    head = max(0, n - 12)
    tail_maps = np.array(list(itertools.product(range(m), repeat=n - head)), dtype=np.int64)
    tail_costs = costs[np.arange(head, n)[None, :], tail_maps].sum(axis=1)
    tail_counts = np.stack([(tail_maps == j).sum(axis=1) for j in range(m)], axis=1)
    for prefix in itertools.product(range(m), repeat=head):
        pre_counts = np.bincount(np.asarray(prefix, dtype=np.int64), minlength=m)
        ok = np.all(tail_counts + pre_counts <= caps, axis=1)
        if not ok.any():
            continue
        pre_cost = sum(costs[i, j] for i, j in enumerate(prefix))
        totals = tail_costs[ok] + pre_cost
        lo = totals.min()
        # recompute near-minimal maps with fsum so the result is order independent
        near = np.flatnonzero(totals <= lo + 1e-9 * max(1.0, abs(lo)))
        for idx in near:
            full = list(prefix) + tail_maps[np.flatnonzero(ok)[idx]].tolist()
            exact = math.fsum(costs[i, j] for i, j in enumerate(full))
            if best is INFEASIBLE or exact < best:
                best = exact
    return best


# -- continuous centers on a fine grid --------------------------------------------


@dataclass
class GridOptimum:
    """Bounds on the best placement of k free centers of uniform capacity.

    ``lower`` bounds the continuous optimum over the clients' bounding box
    (which holds an optimal solution); ``upper`` is the best grid solution
    met, with its centers in ``centers``.
    """

    lower: float
    upper: float
    centers: np.ndarray
    nodes: int
    complete: bool
    resolution: float


def _box_costs(points, lo, hi, power):
    """Cost from every point to the nearest point of every box; boxes are rows of lo/hi."""
    near = np.clip(points[:, None, :], lo[None], hi[None])
    return np.linalg.norm(points[:, None, :] - near, axis=2) ** power


def _tuple_costs(cost, k, eta):
    """Capacitated cost of consecutive column groups of size k (uniform capacity eta)."""
    from .flow import min_cost_assignment
    from .search import pair_costs

    n, cols = cost.shape
    t = cols // k
    if k == 1:
        out = cost.sum(axis=0)
        return out if eta >= n else np.full(t, math.inf)
    if k == 2:
        pairs = np.arange(2 * t).reshape(t, 2)
        return pair_costs(cost, np.ones(n, dtype=np.int64), np.full(cols, eta), pairs)
    out = np.empty(t)
    for i in range(t):
        _, c = min_cost_assignment(cost[:, i * k : (i + 1) * k], np.ones(n, dtype=np.int64), np.full(k, eta))
        out[i] = math.inf if c is INFEASIBLE else c
    return out


def grid_continuous_opt(
    inst: Instance,
    resolution: float | None = None,
    node_limit: int = 2_000_000,
    rel_gap: float = 0.02,
    batch: int = 512,
) -> GridOptimum:
    """Best-first branch and bound over k-tuples of boxes of grid cells.

    Cells have side ``resolution`` (default: client-set diameter / 200).
    A tuple's lower bound uses each client's distance to the nearest point
    of each box; its upper bound places each center in the middle cell of
    its box. Nodes are expanded ``batch`` at a time. Capacities must be
    uniform.
    """
    import heapq

    caps = np.unique(inst.capacities)
    if len(caps) != 1:
        raise ValueError("grid oracle needs uniform capacities")
    eta = int(caps[0])
    k, p = inst.k, inst.power
    pts = inst.coords[np.sort(inst.clients)]
    d = pts.shape[1]
    origin = pts.min(axis=0)
    span = pts.max(axis=0) - origin
    diam = float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=2)))
    if diam == 0:
        c = float(_tuple_costs(np.zeros((len(pts), k)), k, eta)[0])
        return GridOptimum(c, c, np.repeat(pts[:1], k, axis=0), 0, True, 0.0)
    h = resolution or diam / 200
    cells = np.maximum(np.ceil(span / h).astype(np.int64), 1)

    def evaluate(LO, HI):
        """Lower / upper bounds and center points for stacked tuples (T, k, d) in cell units."""
        lo = (origin + LO * h).reshape(-1, d)
        hi = (origin + HI * h).reshape(-1, d)
        lb = _tuple_costs(_box_costs(pts, lo, hi, p), k, eta)
        mids = origin + ((LO + HI) // 2 + 0.5) * h
        mids = np.minimum(mids, origin + span).reshape(-1, d)
        ub = _tuple_costs(_box_costs(pts, mids, mids, p), k, eta)
        return lb, ub, mids.reshape(-1, k, d)

    LO0 = np.zeros((1, k, d), dtype=np.int64)
    HI0 = np.broadcast_to(cells, (1, k, d)).copy()
    lb, ub, mids = evaluate(LO0, HI0)
    best, best_c = float(ub[0]), mids[0]
    heap = [(float(lb[0]), 0, LO0[0], HI0[0])]
    counter, nodes, floor = 1, 0, math.inf
    while heap and nodes < node_limit:
        if heap[0][0] >= best * (1 - rel_gap):
            break
        popped = []
        while heap and len(popped) < batch and heap[0][0] < best * (1 - rel_gap):
            popped.append(heapq.heappop(heap))
        nodes += len(popped)
        kids_lo, kids_hi = [], []
        for lb_i, _, lo, hi in popped:
            width = hi - lo
            if width.max() <= 1:
                floor = min(floor, lb_i)
                continue
            j = int(np.argmax(width.max(axis=1)))
            axis = int(np.argmax(width[j]))
            mid = (lo[j, axis] + hi[j, axis]) // 2
            a_hi = hi.copy()
            a_hi[j, axis] = mid
            b_lo = lo.copy()
            b_lo[j, axis] = mid
            for c_lo, c_hi in ((lo, a_hi), (b_lo, hi)):
                # centers are interchangeable: keep tuples whose first coordinates can ascend
                if np.all(c_lo[:-1, 0] < c_hi[1:, 0]):
                    kids_lo.append(c_lo)
                    kids_hi.append(c_hi)
        if not kids_lo:
            continue
        LO, HI = np.stack(kids_lo), np.stack(kids_hi)
        lb, ub, mids = evaluate(LO, HI)
        i = int(np.argmin(ub))
        if ub[i] < best:
            best, best_c = float(ub[i]), mids[i]
        for t in np.flatnonzero(lb < best * (1 - rel_gap)):
            heapq.heappush(heap, (float(lb[t]), counter, LO[t], HI[t]))
            counter += 1
    complete = not heap or heap[0][0] >= best * (1 - rel_gap)
    lower = min(floor, heap[0][0] if heap else best, best)
    return GridOptimum(float(lower), best, best_c, nodes, bool(complete), h)
