"""Ring-based coreset: partition clients into shells around bicriteria centers
and sample each large shell uniformly without replacement."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bicriteria import BicriteriaSolution, bicriteria_solve
from .instance import Instance

DEFAULT_GAMMA_CONST = 0.5
DEFAULT_MEANS_RESCALE_POWER = 3


def radius_level(d: float) -> int:
    """Exponent e of the power of two R = 2**e with R/2 < d <= R (d > 0)."""
    mant, exp = math.frexp(d)
    return exp - 1 if mant == 0.5 else exp


@dataclass
class RingDecomposition:
    """Client shells keyed by ``(center index, level)``; shell (i, e) holds clients
    of center i with 2**(e-1) < d <= 2**e. Clients sitting on their center go to
    ``colocated``."""

    centers: list
    rings: dict
    colocated: dict
    d_min: float
    d_max: float

    def nonempty(self) -> list:
        return sorted(key for key, members in self.rings.items() if members)

    def sizes(self) -> dict:
        return {key: len(v) for key, v in self.rings.items()}

    def n_clients(self) -> int:
        return sum(len(v) for v in self.rings.values()) + sum(len(v) for v in self.colocated.values())


@dataclass
class WeightedClientSet:
    """Weighted clients with a common weight denominator ``r``.

    Entry ``(client, num)`` has weight ``num / r``; ``provenance`` holds the
    ring ``(center index, level)`` each entry came from (level None for
    clients colocated with their center).
    """

    r: int
    entries: list = field(default_factory=list)
    provenance: list = field(default_factory=list)
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def unit(cls, clients) -> "WeightedClientSet":
        return cls(r=1, entries=[(int(c), 1) for c in clients], provenance=[(None, None)] * len(clients))

    @classmethod
    def from_weights(cls, pairs) -> "WeightedClientSet":
        """Build from ``(client, weight)`` pairs with rational weights."""
        pairs = [(int(c), Fraction(w)) for c, w in pairs]
        r = math.lcm(*[w.denominator for _, w in pairs]) if pairs else 1
        entries = [(c, int(w * r)) for c, w in pairs]
        return cls(r=r, entries=entries, provenance=[(None, None)] * len(entries))

    def weights(self) -> list:
        return [Fraction(num, self.r) for _, num in self.entries]

    def clients(self) -> list:
        return [c for c, _ in self.entries]

    def total_weight(self) -> Fraction:
        return Fraction(sum(num for _, num in self.entries), self.r)

    def scaled(self):
        """Client ids, integer numerators and the common denominator."""
        ids = np.array([c for c, _ in self.entries], dtype=np.int64)
        nums = np.array([num for _, num in self.entries], dtype=np.int64)
        return ids, nums, self.r


def decompose_rings(inst: Instance, bic: BicriteriaSolution) -> RingDecomposition:
    """Bucket every client into the shell around its bicriteria center.

    ``d_min`` / ``d_max`` range over positive assigned client-center distances.
    """
    centers = list(bic.centers)
    index = {f: i for i, f in enumerate(centers)}
    owner = {}
    for c, f, amount in bic.assignment.triples:
        if amount != 1:
            raise ValueError(f"client {c} is split across centers; need an integral assignment")
        owner[c] = f
    missing = [int(c) for c in inst.clients if int(c) not in owner]
    if missing:
        raise ValueError(f"clients without a bicriteria assignment: {missing[:5]}")

    clients = inst.clients
    dist = np.zeros(len(clients))
    owners = np.array([owner[int(c)] for c in clients], dtype=np.int64)
    for f in set(owners.tolist()):
        sel = np.flatnonzero(owners == f)
        dist[sel] = inst.dist(clients[sel], [f])[:, 0]
    rings: dict = defaultdict(list)
    colocated: dict = defaultdict(list)
    for c, d in zip(clients.tolist(), dist.tolist()):
        i = index[owner[c]]
        if d == 0:
            colocated[i].append(c)
        else:
            rings[(i, radius_level(d))].append(c)
    pos = dist[dist > 0]
    d_min = float(pos.min()) if pos.size else 0.0
    d_max = float(pos.max()) if pos.size else 0.0
    return RingDecomposition(centers, dict(rings), dict(colocated), d_min, d_max)


def _ring_rng(seed: int, i: int, level: int) -> np.random.Generator:
    # zigzag keeps negative levels in SeedSequence's nonnegative domain
    zz = 2 * level if level >= 0 else -2 * level - 1
    return np.random.default_rng([int(seed), int(i), int(zz)])


def _sample_prefix(members: list, r: int, rng: np.random.Generator) -> list:
    """First r positions of a Fisher-Yates shuffle (sampling without replacement)."""
    arr = list(members)
    for pos in range(r):
        j = pos + int(rng.integers(0, len(arr) - pos))
        arr[pos], arr[j] = arr[j], arr[pos]
    return arr[:r]


def sample_rings(rings: RingDecomposition, r: int, seed: int = 0) -> WeightedClientSet:
    """Keep shells of size <= r whole (weight 1); sample r members of larger ones
    with weight |shell| / r each."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    W = WeightedClientSet(r=r, seed=seed)
    for i in sorted(rings.colocated):
        for c in rings.colocated[i]:
            W.entries.append((c, r))
            W.provenance.append((i, None))
    for key in sorted(rings.rings):
        members = rings.rings[key]
        if len(members) <= r:
            chosen, num = members, r
        else:
            chosen, num = _sample_prefix(members, r, _ring_rng(seed, *key)), len(members)
        for c in chosen:
            W.entries.append((c, num))
            W.provenance.append(key)
    return W


def ring_sample_size(
    k: int,
    n: float,
    eps: float,
    gamma_const: float = DEFAULT_GAMMA_CONST,
    objective: str = "median",
    means_rescale_power: int = DEFAULT_MEANS_RESCALE_POWER,
) -> int:
    """r = ceil(gamma_const * k * ln n / eps^3); means multiplies by (k ln n)^power,
    i.e. eps is replaced by eps / (k ln n)."""
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    log_n = math.log(max(n, 2.0))
    r = gamma_const * k * log_n / eps**3
    if objective == "means":
        r *= (k * log_n) ** means_rescale_power
    return max(1, math.ceil(r - 1e-9))


def default_r(inst: Instance, eps: float, gamma_const: float = DEFAULT_GAMMA_CONST, **kw) -> int:
    return ring_sample_size(inst.k, inst.n_points, eps, gamma_const, inst.objective, **kw)


def build_coreset(inst: Instance, bic: BicriteriaSolution, r: int, seed: int = 0) -> WeightedClientSet:
    return sample_rings(decompose_rings(inst, bic), r, seed)


def coreset_for(
    inst: Instance,
    eps: float,
    seed: int = 0,
    gamma_const: float = DEFAULT_GAMMA_CONST,
    beta: float = 2.0,
    bicriteria: str = "auto",
    r: int | None = None,
) -> WeightedClientSet:
    """Bicriteria solution, then rings sampled at ``default_r`` (or the given r)."""
    bic = bicriteria_solve(inst, beta, seed, bicriteria)
    return build_coreset(inst, bic, r or default_r(inst, eps, gamma_const), seed)


# -- file format ------------------------------------------------------------------


def coreset_to_dict(W: WeightedClientSet) -> dict:
    return {
        "r": W.r,
        "seed": W.seed,
        "entries": [[c, num, W.r] for c, num in W.entries],
        "provenance": [list(p) for p in W.provenance],
    }


def coreset_from_dict(data: dict) -> WeightedClientSet:
    r = int(data["r"])
    entries = []
    for c, num, den in data["entries"]:
        if int(den) != r:
            raise ValueError(f"entry for client {c} has denominator {den}, expected r={r}")
        entries.append((int(c), int(num)))
    prov = [tuple(p) for p in data.get("provenance", [[None, None]] * len(entries))]
    return WeightedClientSet(r=r, entries=entries, provenance=prov, seed=data.get("seed"))


def save_coreset(W: WeightedClientSet, path) -> None:
    Path(path).write_text(json.dumps(coreset_to_dict(W)))


def load_coreset(path) -> WeightedClientSet:
    return coreset_from_dict(json.loads(Path(path).read_text()))
