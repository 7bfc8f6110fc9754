"""Exact minimum over all k-subsets of a candidate center pool.

Every subset's uncapacitated cost is a lower bound on its capacitated cost.
Subsets are evaluated by min-cost flow in order of that bound, stopping
once the bound reaches the best capacitated cost found, so the result is
the true minimum over all subsets. For one or two centers the capacitated
cost has a closed form, which is computed for every subset up front.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .flow import min_cost_assignment
from .instance import INFEASIBLE

CHUNK = 100_000
DEFAULT_MAX_SUBSETS = 20_000_000


@dataclass
class SubsetSearchResult:
    subset: tuple | None
    cost: object
    flow: np.ndarray | None
    evaluations: int
    enumerated: int
    best_effort: bool = False


def _combination_chunks(m: int, k: int, rng=None, limit=None):
    if limit is not None:
        # sampled subsets, deduplicated, in a deterministic order
        seen = set()
        while len(seen) < limit:
            seen.add(tuple(sorted(rng.choice(m, size=k, replace=False).tolist())))
        combos = np.array(sorted(seen), dtype=np.int64)
        for s in range(0, len(combos), CHUNK):
            yield combos[s : s + CHUNK]
        return
    if k == 1:
        yield np.arange(m, dtype=np.int64)[:, None]
        return
    if k == 2:
        i, j = np.triu_indices(m, 1)
        pairs = np.stack([i, j], axis=1).astype(np.int64)
        for s in range(0, len(pairs), CHUNK):
            yield pairs[s : s + CHUNK]
        return
    it = itertools.combinations(range(m), k)
    while True:
        block = list(itertools.islice(it, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def pair_costs(cost: np.ndarray, supply: np.ndarray, capacity: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Exact capacitated cost (on the supply scale) of every two-center subset in ``pairs``.

    With two centers, shifting a unit from b to a changes the cost by
    c_a - c_b, so the optimum sends to a the units with the smallest
    differences: all negative ones, clipped to [total - cap_b, cap_a].
    Infeasible pairs get +inf.
    """
    a, b = pairs[:, 0], pairs[:, 1]
    ca, cb = cost[:, a], cost[:, b]
    diff = ca - cb
    order = np.argsort(diff, axis=0, kind="stable")
    ds = np.take_along_axis(diff, order, axis=0)
    ws = supply[order]
    cumw = np.cumsum(ws, axis=0)
    cumd = np.cumsum(ws * ds, axis=0)
    total = int(supply.sum())
    neg = (supply[:, None] * (diff < 0)).sum(axis=0)
    lo = total - capacity[b]
    t = np.clip(neg, np.maximum(lo, 0), np.minimum(capacity[a], total))
    idx = (cumw < t[None, :]).sum(axis=0)
    cols = np.arange(len(pairs))
    prev_w = np.where(idx > 0, cumw[np.maximum(idx - 1, 0), cols], 0)
    prev_d = np.where(idx > 0, cumd[np.maximum(idx - 1, 0), cols], 0.0)
    last = np.minimum(idx, len(supply) - 1)
    moved = prev_d + (t - prev_w) * ds[last, cols]
    out = (supply[:, None] * cb).sum(axis=0) + moved
    out[lo > capacity[a]] = np.inf
    return out


def _closed_form(cost, supply, capacity, k, scale, combos):
    """Exact costs for k <= 2 subsets; None for larger k."""
    if k == 1:
        out = (supply[:, None] * cost[:, combos[:, 0]]).sum(axis=0)
        out[capacity[combos[:, 0]] < supply.sum()] = np.inf
        return out / scale
    if k == 2:
        out = np.empty(len(combos))
        step = max(1, CHUNK // max(len(supply), 1))
        for s in range(0, len(combos), step):
            out[s : s + step] = pair_costs(cost, supply, capacity, combos[s : s + step])
        return out / scale
    return None


def best_k_subset(
    cost: np.ndarray,
    supply: np.ndarray,
    capacity: np.ndarray,
    k: int,
    scale: int = 1,
    max_subsets: int = DEFAULT_MAX_SUBSETS,
    max_evaluations: int | None = None,
    seed: int = 0,
) -> SubsetSearchResult:
    """Cheapest capacitated k-subset of the columns of ``cost``.

    ``supply`` / ``capacity`` are integers on the common ``scale``. Among
    equal bounds, lexicographically smaller subsets are tried first. When C(m, k) exceeds
    ``max_subsets`` a seeded random sample of that many subsets is searched
    and the result is flagged best-effort.
    """
    cost = np.asarray(cost, dtype=float)
    supply = np.asarray(supply, dtype=np.int64)
    capacity = np.asarray(capacity, dtype=np.int64)
    n, m = cost.shape
    if k > m:
        return SubsetSearchResult(None, INFEASIBLE, None, 0, 0)
    need = int(supply.sum())
    w = supply / scale
    total = math.comb(m, k)
    sampled = total > max_subsets
    chunks = _combination_chunks(
        m, k, np.random.default_rng(seed), max_subsets if sampled else None
    )

    combos, bounds = [], []
    for block in chunks:
        ok = capacity[block].sum(axis=1) >= need
        block = block[ok]
        if not len(block):
            continue
        combos.append(block)
        if k <= 2:
            continue
        lb = np.empty(len(block))
        step = max(1, CHUNK // max(n, 1))
        for s in range(0, len(block), step):
            sub = block[s : s + step]
            lb[s : s + len(sub)] = (cost[:, sub].min(axis=2) * w[:, None]).sum(axis=0)
        bounds.append(lb)
    if not combos:
        return SubsetSearchResult(None, INFEASIBLE, None, 0, 0, sampled)
    combos = np.concatenate(combos)
    # for k <= 2 rank by the exact closed form and confirm the leaders by flow
    exact = _closed_form(cost, supply, capacity, k, scale, combos)
    bounds = exact if exact is not None else np.concatenate(bounds)
    order = np.lexsort((*combos.T[::-1], bounds))

    best, best_cost, best_flow, evals = None, INFEASIBLE, None, 0
    exhausted = False
    for idx in order:
        lb = bounds[idx]
        if best is not None and lb >= best_cost * (1 - 1e-12):
            break
        if exact is not None and not np.isfinite(lb):
            break
        if max_evaluations is not None and evals >= max_evaluations:
            exhausted = True
            break
        cols = combos[idx]
        flow, c = min_cost_assignment(cost[:, cols], supply, capacity[cols], scale)
        evals += 1
        if flow is not None and (best is None or c < best_cost):
            best, best_cost, best_flow = tuple(int(x) for x in cols), c, flow
    return SubsetSearchResult(best, best_cost, best_flow, evals, len(combos), sampled or exhausted)
