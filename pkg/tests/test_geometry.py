import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusproj.errors import CoverError
from torusproj.geometry import (
    DirectionSet,
    assign_sectors,
    audit_whitney,
    build_cap_cover,
    build_direction_set,
    close_cubes,
    householder_frame,
    max_close_neighbors,
    sample_sphere,
    whitney_decompose,
)
from torusproj.lattice import AnnulusSpec, enumerate_annulus, frequency_points


def unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def test_antipodal_pair():
    ds = build_direction_set(2, 2.0)
    assert len(ds) == 2
    assert ds.min_separation() >= 2 - 1e-12
    assert ds.covering_radius(sample_sphere(2, 10_000)) <= 2


def test_circle_count():
    ds = build_direction_set(2, 0.1)
    assert 40 <= len(ds) <= 70
    assert ds.min_separation() >= 0.1 - 1e-12
    assert ds.covering_radius(sample_sphere(2, 100_000, seed=1)) <= 0.1


def test_sphere_covering():
    ds = build_direction_set(3, 1.0)
    assert 4 <= len(ds) <= 30
    assert ds.min_separation() >= 1.0 - 1e-12
    assert ds.covering_radius(sample_sphere(3, 100_000, seed=2)) <= 1.0


@pytest.mark.parametrize("n,theta0", [(2, 0.05), (3, 0.05), (4, 0.3)])
def test_cone_invariants(n, theta0):
    ds = build_direction_set(n, theta0, cone=0.3)
    assert np.all(ds.dirs[:, -1] >= math.cos(0.3) - 1e-12)
    assert ds.min_separation() >= theta0 * (1 - 1e-12)
    assert ds.covering_radius(sample_sphere(n, 100_000, seed=3, cone=0.3)) <= theta0


def test_theta0_range():
    with pytest.raises(ValueError):
        build_direction_set(2, 2.5)
    with pytest.raises(ValueError):
        build_direction_set(2, 0.0)


def test_single_direction_owns_everything(z2_dual):
    pts = enumerate_annulus(z2_dual, AnnulusSpec(2 * math.pi * 5, 0.5))
    ds = DirectionSet(2.0, np.array([[0.0, 1.0]]))
    assert np.all(assign_sectors(pts, ds).owner == 0)


def test_tie_goes_to_lower_index(z2_dual):
    ds = DirectionSet(2.0, np.array([[0.0, 1.0], [1.0, 0.0]]))
    pts = frequency_points(z2_dual, np.array([[1, 1]]))
    assert assign_sectors(pts, ds).owner[0] == 0
    ds2 = DirectionSet(2.0, np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert assign_sectors(pts, ds2).owner[0] == 0


def test_sector_nearest_oracle(z2_dual):
    pts = enumerate_annulus(z2_dual, AnnulusSpec(2 * math.pi * 5, 0.5))
    ds = build_direction_set(2, 0.3)
    owner = assign_sectors(pts, ds).owner
    dist = np.linalg.norm(pts.directions[:, None, :] - ds.dirs[None], axis=2)
    assert np.array_equal(owner, dist.argmin(axis=1))


def test_covering_violation(z2_dual):
    ds = DirectionSet(0.1, np.array([[0.0, 1.0]]))
    pts = frequency_points(z2_dual, np.array([[1, 0]]))
    with pytest.raises(CoverError):
        assign_sectors(pts, ds)


def test_householder_frame():
    rng = np.random.default_rng(0)
    for n in (2, 3, 5):
        for _ in range(10):
            nu = rng.standard_normal(n)
            nu /= np.linalg.norm(nu)
            f = householder_frame(nu)
            assert np.abs(f @ f.T - np.eye(n)).max() < 1e-12
            assert np.allclose(f[-1], nu, atol=1e-12)


def test_cap_cover_partition_and_geometry(z2_dual):
    a = AnnulusSpec(2 * math.pi * 5, 0.5)
    pts = enumerate_annulus(z2_dual, a)
    cover = build_cap_cover(pts, a)
    assert int(cover.counts.sum()) == 12
    assert sorted(np.concatenate([c.points for c in cover.caps]).tolist()) == list(range(12))
    for c in cover.caps:
        assert c.contains(pts.embed[c.points]).all()
        ang = np.arccos(np.clip(pts.directions[c.points] @ c.axis, -1, 1))
        assert np.all(ang <= 2 * math.sqrt(a.delta / a.lam))


def test_cap_cover_larger(z2_dual):
    a = AnnulusSpec.from_kappa(2 * math.pi * 2**12, 0.5)
    pts = enumerate_annulus(z2_dual, a)
    cover = build_cap_cover(pts, a)
    assert int(cover.counts.sum()) == len(pts)
    half = cover.caps[0].halfwidths
    assert half[0] == pytest.approx(2 * math.sqrt(a.lambda_delta))
    assert half[-1] == pytest.approx(4 * a.delta)


def test_single_cell_cover(z2_dual):
    pts = frequency_points(z2_dual, np.array([[0, 40], [1, 40], [-1, 40]]))
    a = AnnulusSpec(float(pts.radius.mean()), 1.0)
    ds = DirectionSet(2.0, np.array([[0.0, 1.0], [0.0, -1.0]]))
    cover = build_cap_cover(pts, a, directions=ds)
    assert cover.caps[0].count == 3 and cover.caps[1].count == 0


def test_empty_annulus(z2_dual):
    a = AnnulusSpec(2 * math.pi * 5 + 2, 0.01)
    pts = enumerate_annulus(z2_dual, a)
    assert len(pts) == 0
    cover = build_cap_cover(pts, a)
    assert len(cover) > 0 and cover.counts.sum() == 0


def test_whitney_two_directions_all_diagonal():
    ds = DirectionSet(0.1, np.array([unit(1.5), unit(1.6)]))
    dec = whitney_decompose(ds, r=3)
    assert dec.far == [] and len(dec.diagonal) == 4
    assert audit_whitney(ds, dec) == []


def test_whitney_single_far_pair():
    ds = DirectionSet(0.01, np.array([unit(math.pi / 2 - 0.25), unit(math.pi / 2 + 0.25)]))
    dec = whitney_decompose(ds, r=3)
    assert len(dec.far) == 2
    for w in dec.far:
        side = 0.01 * 2**w.k
        assert 0.5 / 8 <= side <= 0.5
    assert audit_whitney(ds, dec) == []
    assert (0, 0) in dec.diagonal


@pytest.mark.parametrize("n", [2, 3])
def test_whitney_audit_cone(n):
    ds = build_direction_set(n, 0.05, cone=0.3)
    dec = whitney_decompose(ds, r=3)
    assert audit_whitney(ds, dec) == []
    assert len(dec.diagonal) + len(dec.far_members()) == len(ds) ** 2


def test_whitney_needs_upper_hemisphere():
    ds = DirectionSet(0.1, np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        whitney_decompose(ds)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=2, max_size=2),
       st.lists(st.integers(-20, 20), min_size=2, max_size=2))
def test_close_cube_separation(mu, mup):
    mu, mup = np.array(mu), np.array(mup)
    if close_cubes(mu, mup):
        sep = np.linalg.norm(mu - mup)
        assert 1 <= sep <= 4 * math.sqrt(2)
        assert np.abs(mu - mup).max() <= 3


def test_close_neighbor_bound():
    for n in (2, 3):
        mu = np.zeros(n - 1, dtype=np.int64)
        grid = np.stack(np.meshgrid(*[np.arange(-4, 5)] * (n - 1), indexing="ij"), -1).reshape(-1, n - 1)
        for base in (mu, mu + 1):
            assert close_cubes(base, grid).sum() <= max_close_neighbors(n)


def test_cover_json_roundtrip(z2_dual):
    import json
    a = AnnulusSpec(2 * math.pi * 5, 0.5)
    cover = build_cap_cover(enumerate_annulus(z2_dual, a), a)
    obj = json.loads(json.dumps(cover.to_dict()))
    assert obj["lambda"] == a.lam
    assert sum(len(c["points"]) for c in obj["caps"]) == 12
