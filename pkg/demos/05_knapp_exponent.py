"""
Knapp examples and the growth exponent at p = 6
===============================================

Unit coefficients on the fullest cap give a function that piles up near a
line.  Its L^6 norm relative to its L^2 norm grows like a power of
lambda * delta; on the square torus with kappa = 1/2 the fitted power comes
out close to 1/6.
"""
import math

from torusproj import exponent_fit, integer_lattice, low_exponent

lams = [2 * math.pi * 2.0**j for j in range(5, 18)]
res = exponent_fit("knapp", integer_lattice(2), 0.5, lams, 6)
for r in res.rows:
    print(f"lambda*delta={r.lambda_delta:9.1f}  support={r.support:2d}  ratio={r.ratio:.4f}")
print(f"slope {res.slope:.4f} +- {res.stderr:.4f}, reference {float(low_exponent(6, 2)):.4f}")

for family in ("flat", "random", "tone"):
    res = exponent_fit(family, integer_lattice(2), 0.5, lams[:5], 6)
    print(f"{family:>6}: slope {res.slope:.4f}")
