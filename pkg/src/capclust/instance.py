"""Problem instances, metrics, objective evaluation and JSON (de)serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

OBJECTIVES = ("median", "means")

# Full O(n^3) triangle check up to this size; sampled above.
TRIANGLE_FULL_MAX = 512
TRIANGLE_SAMPLES = 10_000


class InstanceError(ValueError):
    """Raised for malformed input files or violated instance invariants."""


class InfeasibleError(RuntimeError):
    """No capacity-respecting solution exists for the requested center count."""


class _Infeasible:
    """Sentinel cost of a solution that cannot respect the capacities."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFEASIBLE"

    def __reduce__(self):
        return (_Infeasible, ())


INFEASIBLE = _Infeasible()


@dataclass(frozen=True, eq=False)
class Instance:
    """A capacitated k-median / k-means instance.

    Exactly one of ``coords`` (n x d) and ``dist_matrix`` (n x n) is set.
    Clients and facilities are point indices into ``range(n_points)``.
    """

    n_points: int
    clients: np.ndarray
    facility_ids: np.ndarray
    capacities: np.ndarray
    k: int
    objective: str = "median"
    coords: np.ndarray | None = None
    dist_matrix: np.ndarray | None = None
    _cap_of: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "clients", np.asarray(self.clients, dtype=np.int64))
        object.__setattr__(self, "facility_ids", np.asarray(self.facility_ids, dtype=np.int64))
        object.__setattr__(self, "capacities", np.asarray(self.capacities, dtype=np.int64))
        if self.coords is not None:
            object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        if self.dist_matrix is not None:
            object.__setattr__(self, "dist_matrix", np.asarray(self.dist_matrix, dtype=float))
        for arr in (self.clients, self.facility_ids, self.capacities, self.coords, self.dist_matrix):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(
            self, "_cap_of", {int(f): int(c) for f, c in zip(self.facility_ids, self.capacities)}
        )

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @property
    def power(self) -> int:
        """Exponent applied to distances by the objective."""
        return 2 if self.objective == "means" else 1

    @property
    def is_euclidean(self) -> bool:
        return self.coords is not None

    def capacity(self, f: int) -> int:
        return self._cap_of[int(f)]

    def capacity_of(self, facilities: Sequence[int]) -> np.ndarray:
        return np.array([self._cap_of[int(f)] for f in facilities], dtype=np.int64)

    def dist(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """Plain distance matrix between two lists of point ids."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.coords is not None:
            return cdist(self.coords[rows], self.coords[cols])
        return self.dist_matrix[np.ix_(rows, cols)]

    def d(self, u: int, v: int) -> float:
        return float(self.dist([u], [v])[0, 0])

    def cost_matrix(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """Per-unit assignment cost: distance for median, squared distance for means.

        Squared Euclidean distances are computed directly so integer
        coordinates give exact integer costs.
        """
        if self.objective == "median":
            return self.dist(rows, cols)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.coords is not None:
            return cdist(self.coords[rows], self.coords[cols], "sqeuclidean")
        sub = self.dist_matrix[np.ix_(rows, cols)]
        return sub * sub

    def full_distance_matrix(self) -> np.ndarray:
        if self.dist_matrix is not None:
            return np.array(self.dist_matrix)
        return cdist(self.coords, self.coords)

    def with_(self, **changes) -> "Instance":
        kw = dict(
            n_points=self.n_points,
            clients=self.clients,
            facility_ids=self.facility_ids,
            capacities=self.capacities,
            k=self.k,
            objective=self.objective,
            coords=self.coords,
            dist_matrix=self.dist_matrix,
        )
        kw.update(changes)
        return Instance(**kw)


def make_instance(
    clients,
    facilities,
    k: int,
    objective: str = "median",
    coords=None,
    dist_matrix=None,
    n_points: int | None = None,
    validate: bool = True,
) -> Instance:
    """Build an Instance from plain Python data.

    ``facilities`` is a sequence of ``(point_id, capacity)`` pairs.
    """
    facilities = list(facilities)
    fids = [int(f) for f, _ in facilities]
    caps = [c for _, c in facilities]
    if n_points is None:
        if coords is not None:
            n_points = len(coords)
        elif dist_matrix is not None:
            n_points = len(dist_matrix)
        else:
            raise InstanceError("either coords or dist_matrix is required")
    inst = Instance(
        n_points=int(n_points),
        clients=np.asarray(list(clients), dtype=np.int64),
        facility_ids=np.asarray(fids, dtype=np.int64),
        capacities=np.asarray(_check_caps(caps), dtype=np.int64),
        k=int(k),
        objective=objective,
        coords=None if coords is None else np.asarray(coords, dtype=float),
        dist_matrix=None if dist_matrix is None else np.asarray(dist_matrix, dtype=float),
    )
    if validate:
        validate_instance(inst)
    return inst


def _check_caps(caps):
    out = []
    for c in caps:
        if isinstance(c, bool) or not float(c).is_integer():
            raise InstanceError(f"capacity must be an integer, got {c!r}")
        if c <= 0:
            raise InstanceError(f"nonpositive capacity {c!r}")
        out.append(int(c))
    return out


def validate_instance(inst: Instance, rng_seed: int = 0) -> None:
    """Check every instance invariant; raise InstanceError on the first violation."""
    n = inst.n_points
    if n <= 0:
        raise InstanceError("instance has no points")
    if (inst.coords is None) == (inst.dist_matrix is None):
        raise InstanceError("exactly one of coords / dist_matrix must be given")
    if inst.objective not in OBJECTIVES:
        raise InstanceError(f"unknown objective {inst.objective!r}")
    if inst.coords is not None:
        if inst.coords.ndim != 2 or inst.coords.shape[0] != n:
            raise InstanceError(f"coords must be an {n} x d array")
        if not np.all(np.isfinite(inst.coords)):
            raise InstanceError("coords contain non-finite values")
    else:
        _validate_metric(inst.dist_matrix, n, rng_seed)
    for name, ids in (("client", inst.clients), ("facility", inst.facility_ids)):
        if len(ids) and (ids.min() < 0 or ids.max() >= n):
            raise InstanceError(f"{name} id out of range [0, {n})")
    if len(set(inst.facility_ids.tolist())) != len(inst.facility_ids):
        raise InstanceError("duplicate facility id")
    if len(set(inst.clients.tolist())) != len(inst.clients):
        raise InstanceError("duplicate client id")
    if len(inst.capacities) and inst.capacities.min() <= 0:
        raise InstanceError("nonpositive capacity")
    if inst.k < 1:
        raise InstanceError("k must be a positive integer")
    if inst.k > len(inst.facility_ids):
        raise InstanceError(f"k={inst.k} exceeds the number of facilities ({len(inst.facility_ids)})")


def _validate_metric(D: np.ndarray, n: int, rng_seed: int) -> None:
    if D.shape != (n, n):
        raise InstanceError(f"dist_matrix must be {n} x {n}")
    if not np.all(np.isfinite(D)):
        raise InstanceError("dist_matrix contains non-finite values")
    if np.any(D < 0):
        raise InstanceError("dist_matrix has negative entries")
    if np.any(np.diag(D) != 0):
        raise InstanceError("dist_matrix has nonzero diagonal")
    scale = max(1.0, float(D.max()))
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * scale):
        raise InstanceError("dist_matrix is not symmetric")
    tol = 1e-9 * scale
    if n <= TRIANGLE_FULL_MAX:
        for m in range(n):
            if np.any(D > D[:, m][:, None] + D[m, :][None, :] + tol):
                raise InstanceError("dist_matrix violates the triangle inequality")
    else:
        rng = np.random.default_rng(rng_seed)
        i, j, m = rng.integers(0, n, size=(3, TRIANGLE_SAMPLES))
        if np.any(D[i, j] > D[i, m] + D[m, j] + tol):
            raise InstanceError("dist_matrix violates the triangle inequality")


# -- serialization -----------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    out = {"points": inst.n_points}
    if inst.coords is not None:
        out["coords"] = inst.coords.tolist()
    else:
        out["dist_matrix"] = inst.dist_matrix.tolist()
    out["clients"] = inst.clients.tolist()
    out["facilities"] = [
        {"id": int(f), "cap": int(c)} for f, c in zip(inst.facility_ids, inst.capacities)
    ]
    out["k"] = inst.k
    out["objective"] = inst.objective
    return out


def instance_from_dict(data: dict) -> Instance:
    try:
        n = int(data["points"])
        facilities = [(fac["id"], fac["cap"]) for fac in data["facilities"]]
        return make_instance(
            clients=data["clients"],
            facilities=facilities,
            k=data["k"],
            objective=data.get("objective", "median"),
            coords=data.get("coords"),
            dist_matrix=data.get("dist_matrix"),
            n_points=n,
        )
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance: {exc!r}") from exc


def load_instance(path) -> Instance:
    """Read and validate an instance file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"parse error in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError(f"parse error in {path}: expected a JSON object")
    return instance_from_dict(data)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst)))


# -- objective ----------------------------------------------------------------


def solution_cost(inst: Instance, assignment) -> float:
    """Objective value of an assignment: sum of amount * d (median) or amount * d^2 (means).

    ``assignment`` is an AssignmentSolution or any iterable of
    ``(client, center, amount)`` triples over point ids.
    """
    triples = getattr(assignment, "triples", assignment)
    terms = []
    for c, f, amount in triples:
        unit = inst.cost_matrix([c], [f])[0, 0]
        terms.append(float(Fraction(amount)) * unit)
    return math.fsum(terms)


# -- aspect ratio ---------------------------------------------------------------


def normalize_aspect_ratio(inst: Instance, M: float) -> Instance:
    """Truncate distances above M*n^10 and add M*n^-10 to every off-diagonal pair.

    ``M`` should be the cost of some feasible solution. The result always
    carries an explicit distance matrix and has aspect ratio at most n^21.
    """
    if not M > 0 or not math.isfinite(M):
        raise ValueError(f"M must be a positive finite real, got {M!r}")
    n = inst.n_points
    D = inst.full_distance_matrix()
    cap = M * float(n) ** 10
    shift = M * float(n) ** -10
    out = np.minimum(D, cap) + shift
    np.fill_diagonal(out, 0.0)
    return inst.with_(coords=None, dist_matrix=out)


def aspect_ratio(inst: Instance) -> float:
    """max / min positive pairwise distance over clients and facilities."""
    pts = np.union1d(inst.clients, inst.facility_ids)
    D = inst.dist(pts, pts)
    off = D[~np.eye(len(pts), dtype=bool)]
    pos = off[off > 0]
    if pos.size == 0:
        return 1.0
    return float(pos.max() / pos.min())
