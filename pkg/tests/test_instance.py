import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capclust.flow import cap_assign
from capclust.instance import (
    INFEASIBLE,
    InstanceError,
    aspect_ratio,
    load_instance,
    make_instance,
    normalize_aspect_ratio,
    save_instance,
    solution_cost,
    validate_instance,
)

from conftest import random_coords_instance


def write(tmp_path, data):
    p = tmp_path / "inst.json"
    p.write_text(json.dumps(data))
    return p


def test_minimal_coords_instance(tmp_path):
    p = write(tmp_path, {"points": 2, "coords": [[0, 0], [1, 0]], "clients": [0],
                         "facilities": [{"id": 1, "cap": 1}], "k": 1, "objective": "median"})
    inst = load_instance(p)
    assert inst.n_clients == 1
    assert inst.d(0, 1) == 1.0


def test_two_point_matrix(tmp_path):
    p = write(tmp_path, {"points": 2, "dist_matrix": [[0, 1], [1, 0]], "clients": [0],
                         "facilities": [{"id": 1, "cap": 1}], "k": 1})
    inst = load_instance(p)
    assert inst.d(0, 1) == 1.0
    assert inst.d(1, 0) == 1.0
    assert inst.d(0, 0) == 0.0


def test_zero_capacity_rejected(tmp_path):
    p = write(tmp_path, {"points": 2, "coords": [[0], [1]], "clients": [0],
                         "facilities": [{"id": 1, "cap": 0}], "k": 1})
    with pytest.raises(InstanceError, match="nonpositive capacity"):
        load_instance(p)


@pytest.mark.parametrize(
    "change, msg",
    [
        ({"dist_matrix": [[0, 1, 2], [2, 0, 1], [2, 1, 0]]}, "symmetric"),
        ({"dist_matrix": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}, "triangle"),
        ({"k": 3}, "k"),
    ],
)
def test_invariant_violations(tmp_path, change, msg):
    data = {"points": 3, "dist_matrix": [[0, 1, 2], [1, 0, 1], [2, 1, 0]], "clients": [0],
            "facilities": [{"id": 1, "cap": 1}, {"id": 2, "cap": 1}], "k": 1}
    data.update(change)
    with pytest.raises(InstanceError, match=msg):
        load_instance(write(tmp_path, data))


def test_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InstanceError, match="parse error"):
        load_instance(p)


def test_both_or_no_metric_rejected():
    with pytest.raises(InstanceError):
        make_instance([0], [(1, 1)], 1, coords=[[0], [1]], dist_matrix=[[0, 1], [1, 0]])
    with pytest.raises(InstanceError):
        make_instance([0], [(1, 1)], 1)


def test_infeasible_instance_is_legal():
    inst = make_instance([0, 1], [(2, 1)], 1, coords=[[0], [1], [2]])
    validate_instance(inst)


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    inst = random_coords_instance(rng, 6, 3, 2, "means")
    save_instance(inst, tmp_path / "a.json")
    back = load_instance(tmp_path / "a.json")
    assert back.clients.tolist() == inst.clients.tolist()
    assert back.facility_ids.tolist() == inst.facility_ids.tolist()
    assert back.capacities.tolist() == inst.capacities.tolist()
    assert back.k == inst.k and back.objective == inst.objective
    np.testing.assert_allclose(back.coords, inst.coords, rtol=0, atol=1e-12)


def test_solution_cost_definition():
    inst = make_instance([0], [(1, 1)], 1, coords=[[0, 0], [3, 0]])
    assert solution_cost(inst, []) == 0
    assert solution_cost(inst, [(0, 1, 1)]) == 3
    assert solution_cost(inst.with_(objective="means"), [(0, 1, 1)]) == 9


def test_solution_cost_independent_sum():
    rng = np.random.default_rng(3)
    for objective in ("median", "means"):
        inst = random_coords_instance(rng, 8, 3, 3, objective, cap_hi=8)
        sol = cap_assign(inst, inst.facility_ids)
        again = 0.0
        for c, f, a in sorted(sol.triples, reverse=True):
            d = float(np.linalg.norm(inst.coords[c] - inst.coords[f]))
            again += float(a) * (d if objective == "median" else d * d)
        assert solution_cost(inst, sol) == pytest.approx(again, rel=1e-12)
        assert solution_cost(inst, sol) == pytest.approx(sol.cost, rel=1e-12)


def test_normalize_no_truncation_is_additive():
    n, M = 4, 1.0
    D = np.array([[0, 1, 2, 2.5], [1, 0, 1.5, 2], [2, 1.5, 0, 1], [2.5, 2, 1, 0]])
    inst = make_instance([0, 1], [(2, 2), (3, 2)], 1, dist_matrix=D)
    out = normalize_aspect_ratio(inst, M).dist_matrix
    off = ~np.eye(n, dtype=bool)
    np.testing.assert_allclose(out[off] - D[off], M * n**-10.0, rtol=0, atol=1e-15)
    assert np.all(np.diag(out) == 0)


def test_normalize_truncates_far_pair():
    n, M = 3, 1.0
    big = 2 * M * n**10
    D = np.array([[0, big, big], [big, 0, 1], [big, 1, 0]])
    inst = make_instance([0], [(1, 1), (2, 1)], 1, dist_matrix=D, validate=False)
    out = normalize_aspect_ratio(inst, M).dist_matrix
    assert out[0, 1] == M * n**10 + M * n**-10.0
    assert out[1, 2] == 1 + M * n**-10.0


def test_normalize_rejects_nonpositive_M():
    inst = make_instance([0], [(1, 1)], 1, coords=[[0], [1]])
    with pytest.raises(ValueError):
        normalize_aspect_ratio(inst, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_four_points(seed):
    rng = np.random.default_rng(seed)
    coords = rng.random((4, 2)) * 10 ** rng.uniform(-6, 6)
    inst = make_instance([0, 1], [(2, 2), (3, 2)], 1, coords=coords)
    out = normalize_aspect_ratio(inst, float(rng.uniform(1e-3, 1e3)))
    assert aspect_ratio(out) <= 4.0**21
    validate_instance(out)


def test_normalized_metric_triangle_inequality():
    rng = np.random.default_rng(5)
    coords = rng.random((40, 3))
    inst = make_instance(range(30), [(30 + j, 5) for j in range(10)], 3, coords=coords)
    D = normalize_aspect_ratio(inst, 0.5).dist_matrix
    viol = D[:, None, :] - (D[:, :, None] + D[None, :, :])
    assert viol.max() <= 1e-12


def test_fixed_centers_cost_survives_normalization():
    """Median: optimal cost for fixed F moves by at most 4/n^9 after removing n_c * M n^-10."""
    rng = np.random.default_rng(6)
    for _ in range(20):
        n_c, n_f = int(rng.integers(3, 10)), int(rng.integers(2, 7))
        inst = random_coords_instance(rng, n_c, n_f, 2, "median", integer=True, cap_hi=n_c)
        inst = inst.with_(coords=inst.coords * 50)
        n = inst.n_points
        F = inst.facility_ids.tolist()
        before = cap_assign(inst, F).cost
        if before is INFEASIBLE:
            continue
        M = before + 1.0
        after = cap_assign(normalize_aspect_ratio(inst, M), F).cost - n_c * M * n**-10.0
        assert abs(after - before) <= 4 / n**9 * before
