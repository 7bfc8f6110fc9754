import itertools
import math

import numpy as np
import pytest

from capclust.flow import cap_assign
from capclust.fpt import solve_general
from capclust.generate import GenSpec, generate
from capclust.instance import INFEASIBLE, make_instance
from capclust.oracle import OracleLimitError, exact_solve, exhaustive_assign, grid_continuous_opt

from conftest import random_coords_instance


def test_single_subset_when_k_equals_facilities():
    rng = np.random.default_rng(0)
    inst = random_coords_instance(rng, 6, 3, 3, cap_hi=6)
    res = exact_solve(inst)
    assert res.evaluations <= 1
    if res.feasible:
        assert res.cost == cap_assign(inst, inst.facility_ids).cost


def test_three_facilities_two_centers():
    coords = [[0.0], [1.0], [5.0], [0.0], [1.0], [5.0]]
    inst = make_instance([0, 1, 2], [(3, 3), (4, 3), (5, 3)], 2, coords=coords)
    res = exact_solve(inst)
    assert res.evaluations == 3
    costs = [cap_assign(inst, F).cost for F in itertools.combinations([3, 4, 5], 2)]
    assert res.cost == min(costs)
    assert res.cost == cap_assign(inst, res.centers).cost


def test_cap_exceeded():
    rng = np.random.default_rng(1)
    inst = random_coords_instance(rng, 4, 10, 5, cap_hi=4)
    with pytest.raises(OracleLimitError):
        exact_solve(inst, cap=100)
    with pytest.raises(OracleLimitError):
        exhaustive_assign(inst, inst.facility_ids, cap=10)


def test_exhaustive_single_client_takes_nearest_with_room():
    coords = [[0.0], [1.0], [3.0]]
    inst = make_instance([0], [(1, 1), (2, 1)], 2, coords=coords)
    assert exhaustive_assign(inst, [1, 2]) == 1.0


def test_exhaustive_infeasible():
    inst = make_instance([0, 1, 2], [(3, 1), (4, 1)], 2, coords=[[0], [1], [2], [3], [4]])
    assert exhaustive_assign(inst, [3, 4]) is INFEASIBLE
    assert cap_assign(inst, [3, 4]).cost is INFEASIBLE


def test_exhaustive_matches_flow_on_100_tiny_instances():
    rng = np.random.default_rng(2)
    for t in range(100):
        inst = random_coords_instance(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4)), 1,
                                      ("median", "means")[t % 2], integer=True, cap_hi=4)
        F = inst.facility_ids.tolist()
        got = cap_assign(inst, F).cost
        want = exhaustive_assign(inst, F)
        assert got is want if want is INFEASIBLE else got == want


def test_oracle_is_a_lower_bound_and_agrees_on_ratio_one():
    for seed in range(10):
        inst = generate(GenSpec("planted", n=20, m=6, k=2, capacity="random", seed=seed))
        res = exact_solve(inst)
        sol = solve_general(inst, 0.5, seed)
        assert res.cost <= sol.cost + 1e-12
        if abs(sol.cost - res.cost) <= 1e-12:
            assert cap_assign(inst, sol.centers).cost == res.cost


def test_grid_bounds_bracket_brute_force_k1():
    rng = np.random.default_rng(3)
    for objective in ("median", "means"):
        pts = rng.random((8, 2))
        inst = make_instance(range(8), [(j, 8) for j in range(8)], 1, objective, coords=pts)
        go = grid_continuous_opt(inst, rel_gap=1e-3)
        assert go.complete
        # brute force over every cell center of the same grid
        h = go.resolution
        lo = pts.min(axis=0)
        nx, ny = np.maximum(np.ceil((pts.max(axis=0) - lo) / h).astype(int), 1)
        xs = np.minimum(lo[0] + (np.arange(nx) + 0.5) * h, pts[:, 0].max())
        ys = np.minimum(lo[1] + (np.arange(ny) + 0.5) * h, pts[:, 1].max())
        G = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
        d = np.linalg.norm(G[:, None] - pts[None], axis=2) ** inst.power
        brute = d.sum(axis=1).min()
        assert go.lower <= brute + 1e-12
        assert go.upper >= brute - 1e-12
        assert go.upper <= brute / (1 - 1e-3) + 1e-12


def test_grid_lower_bound_on_known_optimum():
    # two tight pairs far apart; the continuous 2-median optimum is the two gaps
    pts = np.array([[0, 0], [1, 0], [10, 0], [11, 0]], dtype=float)
    inst = make_instance(range(4), [(j, 2) for j in range(4)], 2, coords=pts)
    go = grid_continuous_opt(inst, rel_gap=1e-3)
    assert go.lower <= 2.0 + 1e-9
    assert go.upper >= 2.0 - 1e-9
    assert go.upper <= 2.0 * 1.001


def test_grid_requires_uniform_capacity():
    inst = make_instance([0, 1], [(0, 1), (1, 2)], 1, coords=[[0.0], [1.0]])
    with pytest.raises(ValueError):
        grid_continuous_opt(inst)
