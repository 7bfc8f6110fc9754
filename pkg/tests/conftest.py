import numpy as np
import pytest

from capclust.instance import make_instance

# acceptance criterion id -> (passed, summary line)
ACCEPTANCE: dict = {}


def record(cid: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[cid] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def line_instance():
    """Clients at 0, 1, 2 on a line; facilities at 0 (cap 1) and 2 (cap 2)."""
    coords = np.array([[0.0], [1.0], [2.0], [0.0], [2.0]])
    return make_instance([0, 1, 2], [(3, 1), (4, 2)], k=2, coords=coords)


def random_coords_instance(rng, n_clients, n_fac, k, objective="median", integer=False, cap_hi=None, d=2):
    n = n_clients + n_fac
    coords = rng.integers(0, 20, size=(n, d)).astype(float) if integer else rng.random((n, d))
    cap_hi = cap_hi or n_clients
    caps = rng.integers(1, cap_hi + 1, size=n_fac)
    fac = [(n_clients + j, int(c)) for j, c in enumerate(caps)]
    return make_instance(range(n_clients), fac, k, objective, coords=coords)
