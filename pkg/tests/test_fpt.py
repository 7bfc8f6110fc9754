import itertools
import math

import numpy as np
import pytest

from capclust.coreset import WeightedClientSet
from capclust.flow import cap_assign
from capclust.fpt import (
    FAIL,
    ColorAssignment,
    candidate_group,
    leader_groups,
    pick_max_capacity,
    radius_grid,
    solve_general,
    split_eps,
)
from capclust.generate import GenSpec, generate
from capclust.instance import InfeasibleError, make_instance


def test_radius_grid_small_example():
    # n ln n = e, so the floor eps*gamma/(n ln n) = 1/e lies in (0.25, 0.5]
    assert radius_grid(1.0, math.e, 1.0) == [0.5, 1.0]
    assert radius_grid(1.0, 3, 1.0) == [0.5, 1.0]


def test_radius_grid_contains_gamma_and_stays_above_floor():
    for gamma, n, eps1 in [(7.0, 50, 0.1), (0.01, 1000, 0.0625), (3.0, 2, 0.5)]:
        grid = radius_grid(gamma, n, eps1)
        assert grid[-1] == gamma
        floor = eps1 * gamma / max(n * math.log(n), 1.0)
        assert grid[0] >= floor * (1 - 1e-12)
        assert grid[0] / (1 + eps1) < floor
        bound = math.log(n * math.log(n) / eps1) / math.log1p(eps1) + 2
        assert len(grid) <= bound


def test_radius_grid_rejects_degenerate_gamma():
    with pytest.raises(ValueError):
        radius_grid(0.0, 10, 0.1)
    with pytest.raises(ValueError):
        radius_grid(math.inf, 10, 0.1)


def test_candidate_group_is_half_open():
    coords = [[0.0], [1.0], [1.5], [2.0], [0.5]]
    inst = make_instance([0], [(1, 1), (2, 1), (3, 1), (4, 1)], 1, coords=coords)
    assert candidate_group(inst, 0, 1.0, 1.0) == {1, 2}
    assert candidate_group(inst, 0, 1.0, 1.0, open_below=True) == {1, 2, 4}
    assert candidate_group(inst, 0, 1.0, 1.0, open_above=True) == {1, 2, 3}


def test_pick_max_capacity_ties_to_lowest_id():
    colors = ColorAssignment({3: 0, 5: 0, 7: 1, 9: 1})
    caps = {3: 4, 5: 4, 7: 6, 9: 6}
    assert pick_max_capacity([{3, 5}, {7, 9}], colors, caps) == [3, 7]
    assert pick_max_capacity([{3, 5}, {3, 5}], colors, caps) is FAIL
    # a third group needs a third color
    assert pick_max_capacity([{3}, {7}, {7}], ColorAssignment({3: 0, 7: 1}), {3: 1, 7: 1}) is FAIL


def test_split_eps():
    for eps in (0.1, 0.5, 1.0):
        e0, e1 = split_eps(eps)
        assert (1 + e0) * (3 + 2 * e1) <= 3 + eps


def test_leader_groups_partition_the_facilities():
    inst = generate(GenSpec("uniform", n=20, m=15, k=3, capacity="random", seed=1))
    grid = radius_grid(2.0, inst.n_points, 0.25)
    groups = leader_groups(inst, [0], grid, 0.25)
    members = sorted(f for g in groups for f in g)
    assert members == sorted(inst.facility_ids.tolist())


def test_k_equals_facilities():
    inst = generate(GenSpec("uniform", n=12, m=3, k=3, capacity="uniform", seed=2))
    sol = solve_general(inst, 0.5)
    assert sol.cost == cap_assign(inst, inst.facility_ids).cost


def test_infeasible():
    inst = make_instance([0, 1, 2], [(3, 1), (4, 1)], 2, coords=[[0], [1], [2], [3], [4]])
    with pytest.raises(InfeasibleError):
        solve_general(inst)


def test_planted_with_identity_coloring_recovers_blob_facilities():
    inst = generate(GenSpec("planted", n=30, m=8, k=3, capacity="generous", spread=0.02, seed=3))
    blob = inst.facility_ids[:3].tolist()
    label = {int(f): (blob.index(f) if f in blob else 0) for f in inst.facility_ids}
    sol = solve_general(inst, 0.5, coreset=WeightedClientSet.unit(inst.clients),
                        colorings=[ColorAssignment(label)])
    assert sorted(sol.centers) == sorted(blob)


def test_reported_cost_is_full_assignment_cost():
    for seed in range(5):
        inst = generate(GenSpec("uniform", n=20, m=7, k=2, capacity="random", seed=seed))
        sol = solve_general(inst, 0.5, seed)
        assert sol.cost == cap_assign(inst, sol.centers).cost
        assert len(sol.centers) == 2
