"""(3+eps) capacitated k-median / (9+eps) k-means for general metrics.

Guess, for every optimal center, a coreset client close to it (its leader)
and the leader-center distance rounded down on a geometric grid. Each
guess defines a group of facilities at about that distance from the leader.
Random colorings of the facilities keep the k picks distinct; from group i
the highest-capacity facility with color i is taken.

For a fixed coloring the pick from group i depends only on (leader_i,
radius_i), so the set of center sets produced by all leader and radius
tuples is the product of the per-position pick sets. The solver enumerates
that product instead of the tuples; both yield the same candidates.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .bicriteria import cost_estimate, k_center_solution
from .coreset import DEFAULT_GAMMA_CONST, coreset_for
from .flow import AssignmentSolution, cap_assign, frac_cap_assign
from .instance import InfeasibleError, Instance

log = logging.getLogger(__name__)

FAIL = None
DEFAULT_MAX_COLOR_ROUNDS = 10_000
DEFAULT_MAX_EVALUATIONS = 200_000


@dataclass
class ColorAssignment:
    label: dict
    seed: int | None = None

    @classmethod
    def random(cls, facility_ids, k: int, rng: np.random.Generator, seed=None) -> "ColorAssignment":
        labels = rng.integers(0, k, size=len(facility_ids))
        return cls({int(f): int(c) for f, c in zip(facility_ids, labels)}, seed)


def split_eps(eps: float) -> tuple[float, float]:
    """Coreset and radius-grid accuracies with (1+eps0)(3+2 eps1) <= 3+eps."""
    eps0 = eps1 = eps / 8
    if eps <= 1:
        assert (1 + eps0) * (3 + 2 * eps1) <= 3 + eps + 1e-12
    return eps0, eps1


def radius_grid(gamma: float, n: int, eps1: float) -> list[float]:
    """Values gamma*(1+eps1)^-j, j >= 0, down to eps1*gamma/(n ln n); ascending."""
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValueError(f"degenerate gamma {gamma!r}")
    if not 0 < eps1 <= 1:
        raise ValueError("eps1 must lie in (0, 1]")
    n_log_n = n * math.log(n) if n > 1 else 1.0
    lower = eps1 * gamma / max(n_log_n, 1.0)
    grid = []
    j = 0
    while True:
        R = gamma * (1 + eps1) ** (-j)
        if R < lower * (1 - 1e-12):
            break
        grid.append(R)
        j += 1
    return grid[::-1]


def candidate_group(
    inst: Instance,
    leader: int,
    R: float,
    eps1: float,
    open_below: bool = False,
    open_above: bool = False,
) -> set:
    """Facilities f with R <= d(leader, f) < (1+eps1) R.

    ``open_below`` / ``open_above`` extend the lowest / highest grid band
    to distance 0 / infinity.
    """
    d = inst.dist([leader], inst.facility_ids)[0]
    lo = np.full_like(d, True, dtype=bool) if open_below else d >= R
    hi = np.full_like(d, True, dtype=bool) if open_above else d < (1 + eps1) * R
    return {int(f) for f in inst.facility_ids[lo & hi]}


def _pick(group, colors: ColorAssignment, i: int, cap):
    best = None
    for f in group:
        if colors.label.get(f) != i:
            continue
        key = (-cap(f), f)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def pick_max_capacity(groups, colors: ColorAssignment, capacity) -> list | None:
    """From group i take the largest-capacity facility labelled i (ties: lowest id).

    ``capacity`` maps facility id -> capacity (a dict or an Instance).
    Returns FAIL (None) if some group has no facility with its label.
    """
    cap = capacity.capacity if hasattr(capacity, "capacity") else capacity.__getitem__
    picks = [_pick(g, colors, i, cap) for i, g in enumerate(groups)]
    return FAIL if any(p is None for p in picks) else picks


def _band_index(d: np.ndarray, grid_desc: np.ndarray, eps1: float) -> np.ndarray:
    """Index into the descending grid of the band [R, (1+eps1) R) holding d, clamped to the ends."""
    top = grid_desc[0]
    with np.errstate(divide="ignore"):
        j = np.ceil(np.log(top / d) / math.log1p(eps1)).astype(float)
    j = np.where(np.isfinite(j), j, len(grid_desc) - 1)
    j = np.clip(j, 0, len(grid_desc) - 1).astype(np.int64)
    # fix rounding at band edges against the stored grid values
    for _ in range(2):
        up = (j > 0) & (d >= (1 + eps1) * grid_desc[j])
        j = np.where(up, j - 1, j)
        down = (j < len(grid_desc) - 1) & (d < grid_desc[j])
        j = np.where(down, j + 1, j)
    return j


def leader_groups(inst: Instance, leaders, grid: list[float], eps1: float) -> list[frozenset]:
    """Distinct nonempty facility groups over all (leader, radius) guesses."""
    grid_desc = np.asarray(grid[::-1])
    fids = inst.facility_ids
    D = inst.dist(leaders, fids)
    seen = set()
    out = []
    for row in D:
        bands = _band_index(row, grid_desc, eps1)
        for b in np.unique(bands):
            g = frozenset(int(f) for f in fids[bands == b])
            if g not in seen:
                seen.add(g)
                out.append(g)
    return out


def color_rounds(k: int, n: int, cap: int = DEFAULT_MAX_COLOR_ROUNDS) -> int:
    return max(1, min(math.ceil(k**k * math.log(max(n, 2))), cap))


def solve_general(
    inst: Instance,
    eps: float = 0.5,
    seed: int = 0,
    max_color_rounds: int = DEFAULT_MAX_COLOR_ROUNDS,
    max_evaluations: int = DEFAULT_MAX_EVALUATIONS,
    gamma_const: float = DEFAULT_GAMMA_CONST,
    beta: float = 2.0,
    bicriteria: str = "auto",
    coreset=None,
    colorings=None,
) -> AssignmentSolution:
    """Best center set found by leader/radius guessing with color coding.

    Candidates are ranked by their fractional cost on the coreset; the
    returned cost is recomputed exactly on all clients. ``colorings`` (a
    list of ColorAssignment) replaces the random color rounds.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    k = inst.k
    if int(np.sort(inst.capacities)[::-1][:k].sum()) < inst.n_clients:
        raise InfeasibleError(f"no {k} facilities can serve {inst.n_clients} clients")
    fids = sorted(inst.facility_ids.tolist())
    if k == len(fids):
        sol = cap_assign(inst, fids)
        sol.info.update(algo="fpt-general", evaluations=1)
        return sol

    eps0, eps1 = split_eps(eps)
    if coreset is None:
        coreset = coreset_for(inst, eps0, seed, gamma_const, beta, bicriteria)
    gamma = cost_estimate(inst, seed, beta)
    radius_scale = gamma if inst.power == 1 else math.sqrt(gamma)
    grid = radius_grid(radius_scale, inst.n_points, eps1)
    leaders = sorted(set(coreset.clients()))
    groups = leader_groups(inst, leaders, grid, eps1)

    if colorings is None:
        rng = np.random.default_rng([seed, 0xC010])
        T = color_rounds(k, inst.n_points, max_color_rounds)
        colorings = (ColorAssignment.random(fids, k, rng, seed) for _ in range(T))

    cache: dict = {}
    best_key, best_F = None, None
    exhausted = False
    rounds = 0
    for colors in colorings:
        rounds += 1
        per_position = []
        for i in range(k):
            picks = {_pick(g, colors, i, inst.capacity) for g in groups}
            picks.discard(None)
            per_position.append(sorted(picks))
        if any(not p for p in per_position):
            continue
        for combo in itertools.product(*per_position):
            F = tuple(sorted(combo))
            if F in cache:
                continue
            if len(cache) >= max_evaluations:
                exhausted = True
                break
            sol = frac_cap_assign(inst, coreset, F)
            cache[F] = sol.cost
            if sol.feasible and (best_key is None or (sol.cost, F) < best_key):
                best_key, best_F = (sol.cost, F), F
        if exhausted:
            break

    if best_F is None:
        log.warning("no feasible center set found; returning the cost-estimate solution")
        sol = k_center_solution(inst, seed)
        if sol is None:
            raise InfeasibleError("no feasible k-center solution found")
        sol.best_effort = True
    else:
        sol = cap_assign(inst, best_F)
        sol.best_effort = exhausted
    sol.info.update(
        algo="fpt-general",
        eps=eps,
        coreset_size=len(coreset),
        coreset_cost=None if best_key is None else best_key[0],
        evaluations=len(cache),
        color_rounds=rounds,
        groups=len(groups),
        gamma=gamma,
    )
    return sol
