import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusproj.errors import LatticeError, ResourceLimitError
from torusproj.lattice import (
    AnnulusSpec,
    LatticeBasis,
    brute_force_annulus,
    delta_from_kappa,
    dual_basis,
    enumerate_annulus,
    integer_lattice,
    lattice_from_dict,
    load_lattice,
    save_lattice,
)

from conftest import random_lattice


def test_identity_is_self_dual(z2):
    assert np.array_equal(dual_basis(z2).basis, np.eye(2))


def test_diagonal_dual():
    d = dual_basis(LatticeBasis(np.diag([2.0, 0.5]), validate=False))
    assert np.allclose(d.basis, np.diag([0.5, 2.0]))


def test_shear_duality_product():
    b = LatticeBasis(np.array([[1.0, 1.0], [0.0, 1.0]]))
    d = dual_basis(b)
    assert np.abs(d.basis.T @ b.basis - np.eye(2)).max() < 1e-12
    assert np.allclose(d.basis, [[1, 0], [-1, 1]])


def test_singular_basis_rejected():
    with pytest.raises(LatticeError, match="singular"):
        LatticeBasis(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_short_vector_rejected():
    with pytest.raises(LatticeError):
        LatticeBasis(np.diag([0.5, 1.0]))


@pytest.mark.parametrize("lam,kappa,expected", [
    (100, 1, 1.0), (100, 0.5, 0.1), (2**10, 0.25, 2**-7.5),
])
def test_delta_from_kappa(lam, kappa, expected):
    assert math.isclose(delta_from_kappa(lam, kappa), expected, rel_tol=1e-12)


@pytest.mark.parametrize("kappa", [0, -0.1, 1.5])
def test_delta_from_kappa_range(kappa):
    with pytest.raises(ValueError):
        delta_from_kappa(100, kappa)


def test_annulus_spec_validation():
    with pytest.raises(ValueError):
        AnnulusSpec(10.0, 1.5)
    with pytest.raises(ValueError):
        AnnulusSpec(10.0, 0.5, kappa=0.5)
    a = AnnulusSpec.from_kappa(100.0, 0.5)
    assert a.lambda_delta == pytest.approx(10.0)


@pytest.mark.parametrize("delta", [0.5, 1e-9])
def test_circle_of_radius_five(z2_dual, delta):
    pts = enumerate_annulus(z2_dual, AnnulusSpec(2 * math.pi * 5, delta))
    assert len(pts) == 12
    assert set(map(int, (pts.k**2).sum(axis=1))) == {25}


def test_cube_corners():
    d = dual_basis(integer_lattice(3))
    pts = enumerate_annulus(d, AnnulusSpec(2 * math.pi * math.sqrt(3), 0.5))
    assert len(pts) == 8
    assert np.all(np.abs(pts.k) == 1)


def test_strict_boundary(z2_dual):
    # lower edge sits on the |k| = 5 circle
    lam = 2 * math.pi * 5 + 0.5
    pts = enumerate_annulus(z2_dual, AnnulusSpec(lam, 0.5))
    assert not np.any((pts.k**2).sum(axis=1) == 25)


def test_order_and_membership(z2_dual):
    a = AnnulusSpec(2 * math.pi * 40, 0.3)
    pts = enumerate_annulus(z2_dual, a)
    assert np.all((pts.radius > a.lam - a.delta) & (pts.radius < a.lam + a.delta))
    order = np.lexsort(pts.k.T[::-1])
    assert np.array_equal(order, np.arange(len(pts)))
    again = enumerate_annulus(z2_dual, a)
    assert np.array_equal(pts.k, again.k) and np.array_equal(pts.radius, again.radius)


def test_freq_point_embedding(z2_dual):
    pts = enumerate_annulus(z2_dual, AnnulusSpec(2 * math.pi * 5, 0.5))
    p = pts[0]
    assert np.allclose(p.embed, 2 * math.pi * np.array(p.k))
    assert p.radius == pytest.approx(2 * math.pi * 5)


def test_resource_cap(z2_dual):
    with pytest.raises(ResourceLimitError) as exc:
        enumerate_annulus(z2_dual, AnnulusSpec(2 * math.pi * 1e6, 0.5), max_candidates=1e4)
    assert exc.value.estimate > 1e4


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.sampled_from([2, 3]),
       lam=st.floats(5.0, 120.0), delta=st.floats(0.05, 1.0))
def test_brute_force_oracle(seed, n, lam, delta):
    rng = np.random.default_rng(seed)
    d = dual_basis(random_lattice(rng, n))
    a = AnnulusSpec(lam, delta)
    assert np.array_equal(enumerate_annulus(d, a).k, brute_force_annulus(d, a))


def test_rational_basis_exact_radii():
    b = LatticeBasis(np.array([[3.0, 1.0], [0.0, 2.5]]))
    d = dual_basis(b)
    assert d.exact_gram is not None
    a = AnnulusSpec(2.0, 0.9)
    assert np.array_equal(enumerate_annulus(d, a).k, brute_force_annulus(d, a))


def test_config_roundtrip(tmp_path):
    b = LatticeBasis(np.array([[1.0, 0.5], [0.0, 1.5]]), name="skew")
    p = tmp_path / "lat.json"
    save_lattice(b, p)
    back = load_lattice(p)
    assert np.array_equal(back.basis, b.basis) and back.name == "skew"
    assert json.loads(p.read_text())["n"] == 2


def test_config_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(LatticeError, match="invalid JSON"):
        load_lattice(p)
    with pytest.raises(LatticeError):
        lattice_from_dict({"n": 3, "basis": [[1, 0], [0, 1]]})
    with pytest.raises(LatticeError):
        lattice_from_dict([1, 2])
