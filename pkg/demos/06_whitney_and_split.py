"""
Whitney pairs and the diagonal/far split
========================================

Pairs of directions closer than 2^r theta0 are diagonal.  Every other pair
is filed under exactly one dyadic level and one pair of close cubes.  On a
grid the two halves of the bilinear sum add back up to the square of the
projected field.
"""
import math

import numpy as np

from torusproj import AnnulusSpec, audit_whitney, build_direction_set, dual_basis, enumerate_annulus, integer_lattice, whitney_decompose
from torusproj.norms import diagonal_far_split, random_phase_coeffs

for n in (2, 3):
    ds = build_direction_set(n, 0.05, cone=0.3)
    dec = whitney_decompose(ds, r=3)
    sizes = [len(w.members) for w in dec.far]
    print(f"n={n}: {len(ds)} directions, {len(dec.diagonal)} diagonal pairs, {len(dec.far)} Whitney groups "
          f"(levels {dec.levels}, largest group {max(sizes) if sizes else 0}); audit: {audit_whitney(ds, dec) or 'ok'}")

d = dual_basis(integer_lattice(2))
a = AnnulusSpec.from_kappa(2 * math.pi * 30, 0.5)
pts = enumerate_annulus(d, a)
ds = build_direction_set(2, a.delta)
f = random_phase_coeffs(pts, 3, d)
diag, far, square = diagonal_far_split(f, ds, 3, d)
print("grid", diag.shape, "max |diag + far - square| / max |square| =",
      np.abs(diag + far - square).max() / np.abs(square).max())
print("energy share of far part:", np.linalg.norm(far) / np.linalg.norm(square))
