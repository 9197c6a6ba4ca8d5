"""
Representation counts and the bilinear L^4 bound
================================================

For finite frequency sets A and B the L^2 norm of a product of two series
is a finite coefficient sum.  It never exceeds the square root of the
largest representation count times the two L^2 norms.
"""
import math

import numpy as np

from torusproj import (
    AnnulusSpec,
    CoeffSet,
    bilinear_l4,
    build_cap_cover,
    dual_basis,
    enumerate_annulus,
    exact_even_norm,
    integer_lattice,
    representation_counts,
)
from torusproj.census import cap_stats, classify
from torusproj.energy import transversality_experiment

A = np.array([[0, 0], [1, 0], [2, 0]])
t = representation_counts(A, A)
print("progression 0,1,2:", {k[0]: v for k, v in t.as_dict().items()}, "energy", t.energy)

f = CoeffSet([[0, 0], [1, 0]], [1.0, 1.0])
print("two tones, L^4 norm:", exact_even_norm(f, 4), "vs 6^(1/4) =", 6**0.25)

d = dual_basis(integer_lattice(2))
pts = enumerate_annulus(d, AnnulusSpec(2 * math.pi * 5, 0.5))
rng = np.random.default_rng(0)
g = CoeffSet(pts.k, rng.choice([-1.0, 1.0], size=len(pts)), d)
r = bilinear_l4(g, g)
print(f"12-point circle, random signs: lhs={r.lhs:.4f} rhs={r.rhs:.4f} sMax={r.s_max}")

# pairs of multi-point caps, separated by at least delta
a = AnnulusSpec.from_kappa(2 * math.pi * 2**11, 0.5)
pts = enumerate_annulus(d, a)
cover = build_cap_cover(pts, a)
split = classify(cap_stats(cover, pts), a.lam, a.delta, 0.49, 2)
coeffs = CoeffSet(pts.k, rng.choice([-1.0, 1.0], size=len(pts)), d)
rows = transversality_experiment(cover, split, pts, coeffs=coeffs)
smax = [row.s_max for row in rows]
print(f"{len(split.bad)} caps with 2+ points, {len(rows)} separated pairs, sMax values {sorted(set(smax))}")
print("worst lhs/rhs:", max(row.lhs / row.rhs for row in rows))
