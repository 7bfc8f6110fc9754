"""Capacitated assignment of (weighted) clients to a fixed center set by min-cost flow.

The network is source -> client (supply) -> center (unbounded) -> sink
(capacity). It is solved by successive shortest paths with node
potentials. Client nodes are contracted away: an augmenting path
alternates center -> client (undo part of an existing assignment) ->
center, so Dijkstra only runs over the center nodes. Reduced costs
telescope through the contracted client nodes, so only center and sink
potentials are stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .instance import INFEASIBLE, Instance


@dataclass
class AssignmentSolution:
    """Chosen centers plus an assignment of client weight to them.

    ``triples`` holds ``(client id, center, amount)`` with ``amount`` a
    positive Fraction. ``center`` is a facility id, or an index into
    ``center_coords`` for solutions with free (continuous) centers.
    """

    centers: list
    triples: list = field(default_factory=list)
    cost: object = 0.0
    feasible: bool = True
    best_effort: bool = False
    center_coords: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def is_infeasible(self) -> bool:
        return self.cost is INFEASIBLE

    def amounts_by_client(self) -> dict:
        out: dict = {}
        for c, _, a in self.triples:
            out[c] = out.get(c, Fraction(0)) + a
        return out

    def load_by_center(self) -> dict:
        out: dict = {}
        for _, f, a in self.triples:
            out[f] = out.get(f, Fraction(0)) + a
        return out


@dataclass
class FlowNetwork:
    """Integral transportation network: client supplies, center capacities, arc costs."""

    cost: np.ndarray
    supply: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.supply = np.asarray(self.supply, dtype=np.int64)
        self.capacity = np.asarray(self.capacity, dtype=np.int64)
        n, m = self.cost.shape
        if self.supply.shape != (n,) or self.capacity.shape != (m,):
            raise ValueError("supply/capacity shapes do not match the cost matrix")
        if np.any(self.supply < 0) or np.any(self.capacity < 0):
            raise ValueError("supplies and capacities must be nonnegative integers")

    @property
    def total_supply(self) -> int:
        return int(self.supply.sum())


def min_cost_flow(net: FlowNetwork) -> np.ndarray | None:
    """Optimal integral flow matrix (clients x centers), or None if supply exceeds capacity."""
    cost, supply, capacity = net.cost, net.supply, net.capacity
    n, m = cost.shape
    if int(supply.sum()) > int(capacity.sum()):
        return None
    flow = np.zeros((n, m), dtype=np.int64)
    if n == 0 or int(supply.sum()) == 0:
        return flow
    residual = supply.copy()
    load = np.zeros(m, dtype=np.int64)
    pot = np.zeros(m)
    pot_sink = 0.0
    cols = np.arange(m)
    remaining = int(residual.sum())

    while remaining > 0:
        active = np.flatnonzero(residual > 0)
        sub = cost[active]
        rows = np.argmin(sub, axis=0)
        # reduced cost of source -> client -> center; source potential stays 0
        dist = sub[rows, cols] - pot
        via = active[rows]
        pred = np.full(m, -1, dtype=np.int64)
        done = np.zeros(m, dtype=bool)

        for _ in range(m):
            cand = np.where(done, np.inf, dist)
            u = int(np.argmin(cand))
            if not math.isfinite(cand[u]):
                break
            done[u] = True
            holders = np.flatnonzero(flow[:, u] > 0)
            if holders.size == 0:
                continue
            delta = cost[holders] - cost[holders, u][:, None]
            j = np.argmin(delta, axis=0)
            relaxed = dist[u] + delta[j, cols] + pot[u] - pot
            better = (~done) & (relaxed < dist)
            if better.any():
                dist[better] = relaxed[better]
                pred[better] = u
                via[better] = holders[j[better]]

        to_sink = np.where(load < capacity, dist + pot - pot_sink, np.inf)
        t = int(np.argmin(to_sink))
        d_sink = float(to_sink[t])
        if not math.isfinite(d_sink):
            return None

        # walk back: each hop moves client via[g] from pred[g] to g
        hops = []
        g = t
        while pred[g] != -1:
            hops.append((int(via[g]), int(pred[g]), g))
            g = int(pred[g])
        src = int(via[g])
        amount = min(int(residual[src]), int(capacity[t] - load[t]))
        for c, f_from, _ in hops:
            amount = min(amount, int(flow[c, f_from]))
        flow[src, g] += amount
        for c, f_from, f_to in hops:
            flow[c, f_from] -= amount
            flow[c, f_to] += amount
        residual[src] -= amount
        load[t] += amount
        remaining -= amount

        pot += np.minimum(dist, d_sink)
        pot_sink += d_sink

    return flow


def _flow_cost(flow: np.ndarray, cost: np.ndarray, scale: int) -> float:
    # fsum makes the total independent of summation order
    idx = np.nonzero(flow)
    return math.fsum((flow[idx] / scale) * cost[idx]) if idx[0].size else 0.0


def min_cost_assignment(cost, supply, capacity, scale: int = 1):
    """Solve the scaled network and return ``(flow, cost)`` or ``(None, INFEASIBLE)``.

    The reported cost is ``sum(flow * cost) / scale``.
    """
    net = FlowNetwork(cost, supply, capacity)
    flow = min_cost_flow(net)
    if flow is None:
        return None, INFEASIBLE
    return flow, _flow_cost(flow, net.cost, scale)


def _check_centers(inst: Instance, F) -> list:
    F = [int(f) for f in F]
    if not F:
        raise ValueError("center set F is empty")
    if len(set(F)) != len(F):
        raise ValueError("center set F has duplicates")
    known = set(inst.facility_ids.tolist())
    unknown = [f for f in F if f not in known]
    if unknown:
        raise ValueError(f"unknown facility ids in F: {unknown}")
    return sorted(F)


def _solve(inst, client_ids, nums, den, F) -> AssignmentSolution:
    order = np.argsort(client_ids, kind="stable")
    client_ids = np.asarray(client_ids, dtype=np.int64)[order]
    nums = np.asarray(nums, dtype=np.int64)[order]
    caps = inst.capacity_of(F) * den
    cost = inst.cost_matrix(client_ids, F)
    flow, total = min_cost_assignment(cost, nums, caps, scale=den)
    if flow is None:
        return AssignmentSolution(centers=F, triples=[], cost=INFEASIBLE, feasible=False)
    triples = [
        (int(client_ids[i]), F[j], Fraction(int(flow[i, j]), den))
        for i, j in zip(*np.nonzero(flow))
    ]
    return AssignmentSolution(centers=F, triples=triples, cost=total, feasible=True)


def cap_assign(inst: Instance, F: Sequence[int]) -> AssignmentSolution:
    """Optimal integral assignment of every client (weight 1) to the centers F."""
    F = _check_centers(inst, F)
    n = inst.n_clients
    return _solve(inst, inst.clients, np.ones(n, dtype=np.int64), 1, F)


def frac_cap_assign(inst: Instance, W, F: Sequence[int]) -> AssignmentSolution:
    """Optimal fractional assignment of a weighted client set to the centers F.

    Weights must share the common denominator ``W.r``; the network is scaled
    by it, solved integrally, and the flow descaled.
    """
    F = _check_centers(inst, F)
    if len(W) == 0:
        return AssignmentSolution(centers=F, triples=[], cost=0.0, feasible=True)
    ids, nums, den = W.scaled()
    return _solve(inst, ids, nums, den, F)


def frac_cap_assign_means(inst: Instance, W, F: Sequence[int]) -> AssignmentSolution:
    """Fractional assignment with squared-distance arc costs regardless of ``inst.objective``."""
    return frac_cap_assign(inst.with_(objective="means"), W, F)

