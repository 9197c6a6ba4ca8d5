"""
Lattice points in thin annuli
=============================

Frequencies of a flat torus live on 2*pi times the dual lattice.  We list
the ones whose length falls in a thin window around lambda, first on the
square torus and then on a skewed one.
"""
import math

import numpy as np

from torusproj import AnnulusSpec, LatticeBasis, brute_force_annulus, dual_basis, enumerate_annulus, integer_lattice

# the square torus is self-dual
d = dual_basis(integer_lattice(2))
pts = enumerate_annulus(d, AnnulusSpec(2 * math.pi * 5, 0.5))
print(len(pts), "points with |k| = 5:")
print(pts.k)

# shrinking the window keeps exact-radius points
print(len(enumerate_annulus(d, AnnulusSpec(2 * math.pi * 5, 1e-9))), "points at delta = 1e-9")

# a skewed rational torus; radii are compared with exact Gram arithmetic
skew = LatticeBasis(np.array([[1.0, 0.5], [0.0, 1.25]]), name="skew")
ds = dual_basis(skew)
a = AnnulusSpec.from_kappa(2 * math.pi * 60, 0.5)
pts = enumerate_annulus(ds, a)
print(f"skew torus, lambda={a.lam:.1f}, delta={a.delta:.4f}: {len(pts)} points")
print("matches brute force:", np.array_equal(pts.k, brute_force_annulus(ds, a)))

# counts grow roughly like lambda * delta in two dimensions
for j in range(6, 14, 2):
    a = AnnulusSpec.from_kappa(2 * math.pi * 2.0**j, 0.5)
    print(f"2^{j:<2d}  lambda*delta={a.lambda_delta:8.1f}  points={len(enumerate_annulus(d, a))}")
