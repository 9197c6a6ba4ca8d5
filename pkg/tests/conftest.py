import numpy as np
import pytest

from torusproj.lattice import LatticeBasis, dual_basis


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("TORUSPROJ_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture
def z2():
    return LatticeBasis(np.eye(2), name="Z2")


@pytest.fixture
def z2_dual(z2):
    return dual_basis(z2)


def random_lattice(rng, n):
    """Entries in [1/2, 2], rescaled so the shortest torus vector has length >= 1."""
    while True:
        b = rng.uniform(0.5, 2.0, size=(n, n)) * rng.choice([-1, 1], size=(n, n))
        sv = np.linalg.svd(b, compute_uv=False)
        if sv[-1] / sv[0] < 0.2:
            continue
        lat = LatticeBasis(b, validate=False)
        s = lat.shortest_vector_length()
        return LatticeBasis(b / min(s, 1.0) * 1.0001)
