"""
Bad-cap census
==============

A cap is bad when it holds at least (lambda delta)^((n-1)/2 - eta) points.
With the classification constant pinned to 1 no cap on the square torus
reaches that level at desk scale: the fullest caps hold a handful of points
while the threshold is already above ten.  Lowering the constant (report
only) shows what the census looks like once bad caps exist.
"""
import math

from torusproj import bad_cap_census, integer_lattice

lams = [2 * math.pi * 2.0**j for j in range(5, 16)]
lat = integer_lattice(2)

rep = bad_cap_census(lat, 0.5, lams, 0.1)
print("constant 1")
for r in rep.rows:
    thr = r.lambda_delta ** 0.4
    print(f"  lambda*delta={r.lambda_delta:8.1f}  max cap={r.max_cap_count}  threshold={thr:5.1f}  bad={r.num_bad}")
print("  fit:", rep.fit_note)

for const in (0.5, 0.25):
    rep = bad_cap_census(lat, 0.5, lams, 0.1, const=const)
    print(f"constant {const}: numBad {[r.num_bad for r in rep.rows]}")
    print(f"  slope {rep.slope}, bad-cap dimensions {rep.bad_dim_histogram}")
