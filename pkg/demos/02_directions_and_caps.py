"""
Direction sets, sectors and caps
================================

A greedy separated set of directions partitions the annulus into angular
sectors.  At angular scale (delta/lambda)^(1/2) the sectors become caps:
boxes that are long tangentially and thin radially.
"""
import math

import numpy as np

from torusproj import AnnulusSpec, assign_sectors, build_cap_cover, build_direction_set, dual_basis, enumerate_annulus, integer_lattice
from torusproj.geometry import sample_sphere

for n, theta0 in [(2, 0.1), (3, 1.0), (3, 0.2)]:
    ds = build_direction_set(n, theta0)
    cov = ds.covering_radius(sample_sphere(n, 100_000, seed=0))
    print(f"n={n} theta0={theta0}: {len(ds)} directions, min sep {ds.min_separation():.4f}, covering {cov:.4f}")

# restricted to a cone around the north pole
ds = build_direction_set(3, 0.05, cone=0.3)
print("cone set:", len(ds), "directions, covering",
      round(ds.covering_radius(sample_sphere(3, 100_000, seed=1, cone=0.3)), 4))

d = dual_basis(integer_lattice(2))
a = AnnulusSpec.from_kappa(2 * math.pi * 2**12, 0.5)
pts = enumerate_annulus(d, a)
sectors = assign_sectors(pts, build_direction_set(2, 0.3))
print("sector sizes at theta0=0.3:", np.bincount(sectors.owner))

cover = build_cap_cover(pts, a)
counts = cover.counts
print(f"{len(cover)} caps, {int((counts > 0).sum())} nonempty, largest holds {counts.max()} points")
big = cover.caps[int(np.argmax(counts))]
print("largest cap half-widths", big.halfwidths, "points:")
print(pts.k[big.points])
