import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusproj.census import (
    CapStats,
    affine_dimension,
    bad_cap_census,

    cap_stats,
    census_row,
    classify,
    integer_rank,
    loglog_fit,
    max_cap_check,
)
from torusproj.geometry import build_cap_cover
from torusproj.lattice import AnnulusSpec, dual_basis, enumerate_annulus, integer_lattice

@pytest.mark.parametrize("pts,dim", [
    ([[0, 0]], 0),
    ([[0, 0], [1, 0], [2, 0]], 1),
    ([[0, 0], [1, 0], [0, 1]], 2),
    ([], 0),
])
def test_affine_dimension(pts, dim):
    assert affine_dimension(np.array(pts, dtype=np.int64).reshape(-1, 2)) == dim

def test_rank_large_entries():
    big = 10**15
    rows = [[big, big + 1, 1], [2 * big, 2 * big + 2, 2], [1, 0, 0]]
    assert integer_rank(rows) == 2

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 5), d=st.integers(0, 5), m=st.integers(1, 12))
def test_constructed_rank_recovered(seed, n, d, m):
    d = min(d, n)
    rng = np.random.default_rng(seed)
    if d == 0:
        assert affine_dimension(np.tile(rng.integers(-9, 10, size=n), (m, 1))) == 0
        return
    while True:
        frame = rng.integers(-5, 6, size=(d, n))
        if np.linalg.matrix_rank(frame) == d:
            break
    m = max(m, d + 1)
    coef = rng.integers(-4, 5, size=(m, d))
    # force the first d+1 points to span the frame
    coef[:d + 1] = np.vstack([np.zeros(d, dtype=np.int64), np.eye(d, dtype=np.int64)])
    base = rng.integers(-50, 51, size=n)
    pts = base + coef @ frame
    assert affine_dimension(pts) == d
    assert affine_dimension(pts) <= min(m - 1, n)

def test_threshold_and_classify():
    stats = [CapStats(0, 0, 0), CapStats(1, 1, 0), CapStats(2, 1, 0)]
    split = classify(stats, 100.0, 0.5, 0.1, 2)
    assert split.bad == [] and split.good == [1, 2]
    assert split.threshold == pytest.approx(50**0.4)
    stats = [CapStats(0, 20, 1)]
    assert classify(stats, 100.0, 0.5, 0.1, 2).bad == [0]

@pytest.mark.parametrize("eta", [0.0, 0.5, 0.6, -0.1])
def test_eta_range(eta):
    with pytest.raises(ValueError):
        classify([CapStats(0, 1, 0)], 100.0, 0.5, eta, 2)

def test_threshold_monotone_in_eta(z2_dual):
    a = AnnulusSpec(2 * math.pi * 5, 0.5)
    pts = enumerate_annulus(z2_dual, a)
    stats = cap_stats(build_cap_cover(pts, a), pts)
    prev = -1
    for eta in (0.05, 0.1, 0.2, 0.3, 0.45, 0.49):
        bad = classify(stats, a.lam, a.delta, eta, 2).bad
        assert len(bad) >= prev
        prev = len(bad)

def test_small_circle_classification(z2_dual):
    a = AnnulusSpec(2 * math.pi * 5, 0.5)
    pts = enumerate_annulus(z2_dual, a)
    cover = build_cap_cover(pts, a)
    stats = cap_stats(cover, pts)
    split = classify(stats, a.lam, a.delta, 0.1, 2)
    thr = (a.lam * a.delta) ** 0.4
    assert split.threshold == pytest.approx(thr)
    assert split.bad == [s.cap for s in stats if s.count >= thr]
    assert sorted(split.good + split.bad) == [s.cap for s in stats if s.count > 0]
    mx, bound, ok = max_cap_check(stats, a.lam, a.delta, 2)
    assert bound == pytest.approx(4 * math.sqrt(a.lam * a.delta))
    assert ok and mx == max(s.count for s in stats)

def test_max_cap_empty():
    with pytest.raises(ValueError):
        max_cap_check([], 10.0, 0.5, 2)

def test_single_point_bound():
    _, bound, ok = max_cap_check([CapStats(0, 1, 0)], 1.0, 0.25 ** 2, 2)
    assert ok and bound == pytest.approx(1.0)

def test_cap_stats_consistency(z2_dual):
    a = AnnulusSpec(2 * math.pi * 5, 0.5)
    pts = enumerate_annulus(z2_dual, a)
    cover = build_cap_cover(pts, a)
    with pytest.raises(ValueError):
        cap_stats(cover, pts.subset(np.arange(5)))

def test_loglog_fit_recovers_power():
    x = np.array([1.0, 2, 4, 8, 16])
    slope, icpt, se = loglog_fit(x, 3 * x**0.7)
    assert slope == pytest.approx(0.7) and math.exp(icpt) == pytest.approx(3)
    assert se < 1e-10
    assert loglog_fit([1.0], [1.0]) is None

def test_census_single_lambda():
    rep = bad_cap_census(integer_lattice(2), 0.5, [2 * math.pi * 32], 0.1)
    assert len(rep.rows) == 1 and rep.slope is None
    assert "undefined" in rep.fit_note

def test_census_degenerate_eta():
    # eta close to 1/2 lowers the threshold to about 1: every cap with two points turns bad
    lams = [2 * math.pi * 2**j for j in range(9, 13)]
    rep = bad_cap_census(integer_lattice(2), 0.5, lams, 0.49)
    for r in rep.rows:
        assert 0 < r.num_bad <= r.num_caps
        assert r.max_cap_count <= r.total_points
    assert rep.slope is not None
    json.loads(rep.to_json())

def test_census_sanity_and_csv():
    lams = [2 * math.pi * 2**j for j in range(5, 10)]
    rep = bad_cap_census(integer_lattice(2), 0.5, lams, 0.1)
    d = dual_basis(integer_lattice(2))
    for r, lam in zip(rep.rows, lams):
        a = AnnulusSpec.from_kappa(lam, 0.5)
        pts = enumerate_annulus(d, a)
        row, cover, stats, _ = census_row(pts, a, 0.1)
        assert sum(s.count for s in stats) == len(pts) == r.total_points
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["lambda", "delta", "lambda_delta", "total_points", "num_caps",
                       "max_cap_count", "num_bad", "slope_so_far"]
    assert len(rows) == 1 + len(lams)

def test_census_truncation():
    lams = [2 * math.pi * 2**j for j in (5, 6, 20)]
    rep = bad_cap_census(integer_lattice(2), 0.5, lams, 0.1, max_candidates=1e5)
    assert rep.truncated and len(rep.rows) == 2
    assert rep.to_csv().rstrip().splitlines()[-1].startswith("# truncated")

def test_census_rejects_unsorted():
    with pytest.raises(ValueError):
        bad_cap_census(integer_lattice(2), 0.5, [200.0, 100.0], 0.1)
