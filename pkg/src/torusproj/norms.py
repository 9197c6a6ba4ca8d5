"""Grid synthesis of torus Fourier series, L^p norms and exponent experiments.

Sampling the fundamental domain at x = B* (j / N) turns synthesis into an
integer-frequency DFT for any lattice, because <k_L, e_j*> = k_j.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .census import loglog_fit
from .energy import CoeffSet, exact_even_norm
from .errors import ConvergenceWarning, ResourceLimitError
from .geometry import (
    CapCover,
    DirectionSet,
    assign_sectors,
    build_cap_cover,
    build_direction_set,
    diagonal_mask,
)
from .lattice import (
    DEFAULT_MAX_CANDIDATES,
    AnnulusSpec,
    DualBasis,
    LatticeBasis,
    PointSet,
    dual_basis,
    enumerate_annulus,
    frequency_points,
)

DEFAULT_OVERSAMPLE = 4.0
MAX_GRID_POINTS = 2**24
CONVERGENCE_RTOL = 1e-3


class UndersampledError(ValueError):
    def __init__(self, message, required):
        super().__init__(message)
        self.required = required


def p_critical(n: int) -> Fraction:
    return Fraction(2 * (n + 1), n - 1)


def p_endpoint(n: int) -> Fraction | float:
    return Fraction(2 * n, n - 2) if n > 2 else math.inf


def low_exponent(p, n: int):
    """(n-1)/2 (1/2 - 1/p); exact when p is a Fraction or int."""
    if isinstance(p, (Fraction, int)):
        return Fraction(n - 1, 2) * (Fraction(1, 2) - Fraction(1) / Fraction(p))
    return (n - 1) / 2 * (0.5 - 1.0 / p)


def high_exponent(p, n: int):
    if isinstance(p, (Fraction, int)):
        return Fraction(n - 1, 2) - Fraction(n) / Fraction(p)
    return (n - 1) / 2 - n / p


def interpolated_exponent(p, n: int) -> float:
    pc = float(p_critical(n))
    return (n + 1) / (n - 1) * ((1 / p - 1 / pc) / (1 / p - (n - 3) / (2 * (n - 1))))


@dataclass(frozen=True)
class GridSpec:
    N: int | None = None
    oversample: float = DEFAULT_OVERSAMPLE

    def __post_init__(self):
        if self.oversample < 2:
            raise ValueError(f"oversample must be at least 2, got {self.oversample}")

    def required(self, kmax: int) -> int:
        return int(math.ceil(self.oversample * (2 * kmax + 1)))

    def resolve(self, kmax: int, n: int, max_points: int = MAX_GRID_POINTS) -> int:
        need = self.required(kmax)
        if self.N is None:
            N = 1 << max(int(math.ceil(math.log2(max(need, 2)))), 1)
        else:
            N = int(self.N)
            if N < need:
                raise UndersampledError(
                    f"grid N={N} undersamples max frequency {kmax} "
                    f"at oversample {self.oversample}: need N >= {need}",
                    need,
                )
        if N**n > max_points:
            raise ResourceLimitError(f"grid {N}^{n} exceeds {max_points} points", estimate=N**n)
        return N

    def doubled(self) -> "GridSpec":
        return GridSpec(None if self.N is None else 2 * self.N, self.oversample)


@dataclass(eq=False)
class SampledField:
    values: np.ndarray
    V: float
    N: int
    coeffs: CoeffSet | None = field(default=None, repr=False)
    shift: np.ndarray | None = None
    grid: GridSpec | None = None

    @property
    def n(self) -> int:
        return self.values.ndim

    def l2(self) -> float:
        return math.sqrt(self.V * float(np.mean(np.abs(self.values) ** 2)))


def _shift_for(f: CoeffSet, center: bool) -> np.ndarray:
    if not center or len(f) == 0:
        return np.zeros(f.n, dtype=np.int64)
    lo, hi = f.k.min(axis=0), f.k.max(axis=0)
    return (lo + hi) // 2


def synthesize(
    f: CoeffSet, g: GridSpec = GridSpec(), V: float = 1.0, center: bool = False,
    shift=None, degree: int = 1,
) -> SampledField:
    """Values of sum_k a_k V^{-1/2} e^{2 pi i <k, j>/N} on the N^n grid.

    ``center`` (or an explicit integer ``shift``) modulates frequencies by
    -shift first; that multiplies the field by a unimodular factor and leaves
    |f| unchanged.  ``degree`` sizes the grid for products of that many
    copies of the field.
    """
    n = f.n
    s = np.asarray(shift, dtype=np.int64) if shift is not None else _shift_for(f, center)
    k = f.k - s
    kmax = int(np.abs(k).max()) if len(f) else 0
    N = g.resolve(degree * kmax, n)
    arr = np.zeros((N,) * n, dtype=complex)
    if len(f):
        np.add.at(arr, tuple((k % N).T), f.amp)
    vals = np.fft.ifftn(arr) * (N**n) / math.sqrt(V)
    return SampledField(vals, V, N, f, s, g)


def lp_norm_checked(s: SampledField, p: float, rtol: float = CONVERGENCE_RTOL):
    """(value, converged) for the grid L^p norm.

    Even p on a grid with oversample >= p/2 is exact.  Otherwise the norm is
    recomputed on a doubled grid; ``converged`` is None when no coefficients
    are attached to redo the synthesis.
    """
    if not math.isfinite(p) or p < 1:
        raise ValueError(f"p must be finite and >= 1, got {p}")
    val = float((s.V * np.mean(np.abs(s.values) ** p)) ** (1.0 / p))
    even = float(p).is_integer() and int(p) % 2 == 0
    if s.coeffs is not None:
        exact = even and _exact_ok(s, p)
    else:
        exact = even and s.grid is not None and s.grid.oversample >= p / 2
    if exact:
        return val, True
    if s.coeffs is None:
        return val, None
    g2 = GridSpec(2 * s.N, 2.0)
    s2 = synthesize(s.coeffs, g2, s.V, shift=s.shift)
    val2 = float((s2.V * np.mean(np.abs(s2.values) ** p)) ** (1.0 / p))
    ok = abs(val2 - val) <= rtol * max(abs(val2), 1e-300)
    return val2 if ok else val, ok


def _exact_ok(s: SampledField, p: float) -> bool:
    if s.coeffs is None or len(s.coeffs) == 0:
        return True
    kmax = int(np.abs(s.coeffs.k - s.shift).max())
    return s.N > p * kmax


def lp_norm(s: SampledField, p: float, rtol: float = CONVERGENCE_RTOL) -> float:
    val, ok = lp_norm_checked(s, p, rtol)
    if ok is False:
        warnings.warn(f"L^{p} norm did not converge under grid doubling", ConvergenceWarning, stacklevel=2)
    return val


def coeff_norm(f: CoeffSet, p: float, V: float = 1.0, oversample: float | None = None) -> tuple[float, bool | None]:
    """||f||_p on a centered grid sized for p; (value, converged)."""
    if len(f) == 0:
        return 0.0, True
    os_ = oversample or max(DEFAULT_OVERSAMPLE, math.ceil(p / 2))
    s = synthesize(f, GridSpec(None, os_), V, center=True)
    return lp_norm_checked(s, p)


@dataclass(frozen=True)
class Region:
    name: str
    k: np.ndarray
    lattice: DualBasis | None = None


def annulus_region(pts: PointSet, lattice=None) -> Region:
    return Region("annulus", pts.k, lattice)


def sector_region(pts: PointSet, owner: np.ndarray, j: int, lattice=None) -> Region:
    return Region(f"sector:{j}", pts.k[owner == j], lattice)


def cap_region(pts: PointSet, cover: CapCover, j: int, lattice=None) -> Region:
    return Region(f"cap:{j}", pts.k[cover.caps[j].points], lattice)


def caps_region(pts: PointSet, cover: CapCover, caps, name: str, lattice=None) -> Region:
    idx = [cover.caps[j].points for j in caps]
    idx = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
    return Region(name, pts.k[np.sort(idx)], lattice)


def _member_mask(k: np.ndarray, region_k: np.ndarray) -> np.ndarray:
    if k.shape[0] == 0 or region_k.shape[0] == 0:
        return np.zeros(k.shape[0], dtype=bool)
    keys = {tuple(r) for r in region_k.tolist()}
    return np.array([tuple(r) in keys for r in k.tolist()], dtype=bool)


def project(f: CoeffSet, region: Region) -> CoeffSet:
    """Fourier multiplier by the indicator of the region's frequency set."""
    if region.lattice is not None and f.lattice is not None and region.lattice.digest != f.lattice.digest:
        raise ValueError(f"region {region.name} is defined on a different lattice")
    if region.k.shape[0] and len(f) and region.k.shape[1] != f.n:
        raise ValueError("region and coefficients have different dimensions")
    return f.restrict(_member_mask(f.k, region.k))


def knapp_coeffs(cap_points: np.ndarray, lattice: DualBasis | None = None) -> CoeffSet:
    """Unit amplitude on every point of one cap, L^2-normalized."""
    k = np.asarray(cap_points, dtype=np.int64)
    if k.shape[0] == 0:
        raise ValueError("Knapp example needs a nonempty cap")
    return CoeffSet(k, np.full(k.shape[0], k.shape[0] ** -0.5), lattice)


def flat_coeffs(pts: PointSet, lattice=None) -> CoeffSet:
    return CoeffSet(pts.k, np.ones(len(pts)), lattice).normalized()


def random_phase_coeffs(pts: PointSet, seed: int, lattice=None) -> CoeffSet:
    rng = np.random.default_rng(seed)
    ph = np.exp(2j * np.pi * rng.random(len(pts)))
    return CoeffSet(pts.k, ph, lattice).normalized()


def diagonal_far_split(
    f: CoeffSet, ds: DirectionSet, r: int, lattice: DualBasis,
    g: GridSpec = GridSpec(), V: float | None = None,
):
    """Diagonal and far parts of (P f)^2 on the grid.

    Returns (diag, far, square) fields: diag sums P_nu f P_nu' f over pairs
    with |nu - nu'| < 2^r theta0, far over the rest, square is (P f)^2
    synthesized independently.  Grids are sized for the doubled degree.
    """
    V = lattice.torus_volume if V is None else V
    if len(f) == 0:
        s = synthesize(f, g, V, degree=2)
        z = np.zeros_like(s.values)
        return z, z.copy(), z.copy()
    pts = frequency_points(lattice, f.k)
    sectors = assign_sectors(pts, ds)
    diag = diagonal_mask(ds.dirs, ds.theta0, r)
    active = np.unique(sectors.owner)
    full = synthesize(f, g, V, degree=2)
    N = full.N
    gN = GridSpec(N, 2.0)
    dfield = np.zeros_like(full.values)
    ffield = np.zeros_like(full.values)
    for j in active:
        own = f.restrict(sectors.owner == j)
        near = diag[j][sectors.owner]
        fj = synthesize(own, gN, V).values
        if near.any():
            dfield += fj * synthesize(f.restrict(near), gN, V).values
        if (~near).any():
            ffield += fj * synthesize(f.restrict(~near), gN, V).values
    return dfield, ffield, full.values**2


def decoupling_ratio(
    f: CoeffSet, cover: CapCover, pts: PointSet, p: float, V: float = 1.0,
    oversample: float | None = None,
) -> tuple[float, bool]:
    """||P f||_p / (sum over caps of ||P_omega f||_p^2)^{1/2}; (ratio, converged)."""
    pf = f.restrict(_member_mask(f.k, pts.k))
    if pf.l2norm == 0:
        raise ValueError("zero function has no decoupling ratio")
    num, ok = coeff_norm(pf, p, V, oversample)
    pos = {tuple(r): i for i, r in enumerate(pts.k.tolist())}
    owner = np.array([cover.assignment[pos[tuple(r)]] for r in pf.k.tolist()])
    total = 0.0
    all_ok = ok is not False
    for j in np.unique(owner):
        val, okj = coeff_norm(pf.restrict(owner == j), p, V, oversample)
        total += val * val
        all_ok = all_ok and okj is not False
    return num / math.sqrt(total), all_ok


FAMILIES = ("knapp", "flat", "random", "sector", "tone")


def family_member(
    family: str, pts: PointSet, a: AnnulusSpec, lattice: DualBasis, seed: int = 0,
    cover: CapCover | None = None,
) -> CoeffSet:
    if len(pts) == 0:
        raise ValueError(f"empty annulus at lambda={a.lam}")
    if family == "tone":
        return CoeffSet(pts.k[:1], [1.0], lattice)
    if family == "flat":
        return flat_coeffs(pts, lattice)
    if family == "random":
        return random_phase_coeffs(pts, seed, lattice)
    if family == "knapp":
        cover = cover or build_cap_cover(pts, a)
        j = int(np.argmax(cover.counts))
        return knapp_coeffs(pts.k[cover.caps[j].points], lattice)
    if family == "sector":
        ds = build_direction_set(pts.n, a.delta)
        owner = assign_sectors(pts, ds).owner
        j = int(np.argmax(np.bincount(owner)))
        return flat_coeffs(pts.subset(np.flatnonzero(owner == j)), lattice)
    raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")


@dataclass
class FitRow:
    lam: float
    delta: float
    lambda_delta: float
    support: int
    norm: float
    ratio: float
    converged: bool


@dataclass
class FitResult:
    family: str
    p: float
    n: int
    slope: float | None
    intercept: float | None
    stderr: float | None
    reference: float
    rows: list[FitRow]
    flagged: bool = False
    note: str = ""


def exponent_fit(
    family: str,
    lattice: LatticeBasis,
    kappa: float,
    lambdas,
    p: float,
    seed: int = 0,
    max_candidates: float = DEFAULT_MAX_CANDIDATES,
) -> FitResult:
    """Regress log(||P f||_p / ||f||_2) on log(lambda delta) over a lambda list."""
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) < 4:
        raise ValueError("an exponent fit needs at least 4 lambda values")
    d = dual_basis(lattice)
    V = lattice.volume
    rows = []
    for lam in lambdas:
        a = AnnulusSpec.from_kappa(lam, kappa)
        pts = enumerate_annulus(d, a, max_candidates)
        f = family_member(family, pts, a, d, seed)
        val, ok = _norm_any(f, p, V)
        rows.append(FitRow(lam, a.delta, a.lambda_delta, len(f), val, val / f.norm2(), ok is not False))
    fit = loglog_fit([r.lambda_delta for r in rows], [r.ratio for r in rows])
    flagged = not all(r.converged for r in rows)
    return FitResult(
        family, p, lattice.n, fit[0], fit[1], fit[2], float(low_exponent(p, lattice.n)), rows,
        flagged, "convergence gate failed for some rows" if flagged else "",
    )


def _norm_any(f: CoeffSet, p: float, V: float):
    try:
        return coeff_norm(f, p, V)
    except ResourceLimitError:
        if float(p).is_integer() and int(p) % 2 == 0:
            return exact_even_norm(f, int(p), V), True
        raise
