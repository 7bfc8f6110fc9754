import numpy as np
import pytest

from capclust.coreset import WeightedClientSet
from capclust.euclid import (
    CapacityError,
    gen_candidates_continuous,
    geometric_median,
    means_generator,
    median_generator,
    merge_close_points,
    solve_continuous,
    solve_discrete,
    subset_size,
)
from capclust.flow import cap_assign
from capclust.generate import GenSpec, generate
from capclust.instance import InfeasibleError, InstanceError, make_instance


def colocated(points, k, cap, objective="median"):
    n = len(points)
    return make_instance(range(n), [(j, cap) for j in range(n)], k, objective, coords=points)


def test_all_clients_at_one_point():
    inst = colocated(np.ones((6, 2)), 1, 6)
    assert solve_continuous(inst).cost == 0
    assert solve_discrete(inst).cost == 0


def test_two_points_one_center():
    inst = colocated(np.array([[0.0, 0.0], [2.0, 0.0]]), 1, 2)
    sol = solve_continuous(inst)
    assert sol.cost == pytest.approx(2.0)
    means = solve_continuous(colocated(np.array([[0.0, 0.0], [2.0, 0.0]]), 1, 2, "means"))
    assert means.cost == pytest.approx(2.0)
    assert means.center_coords[0] == pytest.approx([1.0, 0.0])


def test_k_equals_n_costs_zero():
    pts = np.random.default_rng(0).random((5, 2))
    assert solve_continuous(colocated(pts, 5, 1)).cost == pytest.approx(0.0, abs=1e-12)


def test_means_generator_returns_centroid_first():
    rng = np.random.default_rng(1)
    S = rng.random((10, 3))
    out = means_generator(S, np.array([1.0]), 0.5, rng)
    assert np.allclose(out[0], S.mean(axis=0))
    assert len(out) == 5


def test_geometric_median_beats_neighbours():
    rng = np.random.default_rng(2)
    S = rng.random((9, 2))
    z = geometric_median(S)
    f = lambda p: np.linalg.norm(S - p, axis=1).sum()
    for step in np.vstack([np.eye(2), -np.eye(2)]) * 1e-4:
        assert f(z) <= f(z + step) + 1e-12
    # collinear odd set: the median is the middle point
    assert geometric_median(np.array([[0.0], [1.0], [5.0]])) == pytest.approx([1.0])


def test_median_generator_star():
    S = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
    out = median_generator(S, np.array([2 ** 0.5]), 0.5, np.random.default_rng(0))
    assert out[0] == pytest.approx([1.0, 1.0])
    assert len(out) == 5


def test_merge_close_points():
    pts = np.array([[0.0], [0.05], [1.0], [1.04]])
    kept, merged = merge_close_points(pts, [1, 2, 3, 4], 0.1)
    assert kept == [0, 2] and merged == [3, 7]


def test_candidate_count_bounded():
    inst = generate(GenSpec("uniform", n=30, m=1, k=2, capacity="uniform", colocated=True, seed=3))
    W = WeightedClientSet.unit(inst.clients)
    cand = gen_candidates_continuous(inst, W, 0.5, candidate_budget=300, subset_budget=50)
    assert 30 <= len(cand) <= 300
    assert cand.meta["subset_size"] == min(subset_size(2, 0.5), 30)
    assert cand.best_effort


def test_nonuniform_capacity_rejected():
    inst = make_instance([0, 1], [(0, 1), (1, 2)], 1, coords=[[0.0], [1.0]])
    with pytest.raises(CapacityError):
        solve_continuous(inst)


def test_continuous_infeasible():
    with pytest.raises(InfeasibleError):
        solve_continuous(colocated(np.random.default_rng(4).random((6, 2)), 2, 2))


def test_metric_only_instance_rejected():
    D = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    inst = make_instance([0, 1], [(2, 2)], 1, dist_matrix=D)
    with pytest.raises(InstanceError):
        solve_discrete(inst)
    with pytest.raises(InstanceError):
        solve_continuous(inst)


def test_adversarial_prefers_large_facilities():
    for seed in range(5):
        inst = generate(GenSpec("adversarial", n=30, m=6, k=2, capacity="uniform", spread=0.03, seed=seed))
        sol = solve_discrete(inst, 0.5, seed)
        decoys = set(inst.facility_ids[-2:].tolist())
        assert not set(sol.centers) & decoys
        assert sol.cost == cap_assign(inst, sol.centers).cost


def test_solvers_deterministic():
    inst = generate(GenSpec("planted", n=40, m=10, k=3, capacity="uniform", seed=5))
    a, b = solve_discrete(inst, 0.5, 9), solve_discrete(inst, 0.5, 9)
    assert a.centers == b.centers and a.cost == b.cost
    cinst = generate(GenSpec("planted", n=25, m=1, k=2, capacity="uniform", colocated=True, seed=5))
    c, d = solve_continuous(cinst, 0.5, 9), solve_continuous(cinst, 0.5, 9)
    assert np.array_equal(c.center_coords, d.center_coords) and c.cost == d.cost
