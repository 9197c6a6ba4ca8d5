"""General lattices, their duals, and frequency enumeration in thin annuli.

The torus is R^n / L* where the columns of ``LatticeBasis.basis`` generate
L*.  Laplace eigenfunctions live on the dual lattice L, whose generators are
the columns of ``DualBasis.basis``; a frequency with integer coordinates k
sits at ``2*pi * D @ k``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import LatticeError, ResourceLimitError

TWO_PI = 2.0 * math.pi
DEFAULT_MAX_CANDIDATES = 10**8

# denominators beyond this are not treated as rational input
_MAX_DENOMINATOR = 10**6


def _as_square(basis) -> np.ndarray:
    arr = np.array(basis, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise LatticeError(f"basis must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise LatticeError("empty basis")
    if not np.all(np.isfinite(arr)):
        raise LatticeError("basis has non-finite entries")
    return arr


def _check_nonsingular(arr: np.ndarray) -> None:
    sv = np.linalg.svd(arr, compute_uv=False)
    scale = max(float(sv[0]), 1.0)
    if sv[-1] <= 1e-12 * scale:
        raise LatticeError(
            f"singular basis: smallest singular value {sv[-1]:.3e} "
            f"(largest {sv[0]:.3e})"
        )


def _rational_entries(arr: np.ndarray) -> list[list[Fraction]] | None:
    rows = []
    for row in arr:
        out = []
        for x in row:
            fr = Fraction(float(x)).limit_denominator(_MAX_DENOMINATOR)
            if float(fr) != float(x):
                return None
            out.append(fr)
        rows.append(out)
    return rows


def fraction_inverse(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    """Exact Gauss-Jordan inverse of a square matrix of Fractions."""
    n = len(mat)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise LatticeError("singular rational matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Generators of L* as matrix columns.

    The injectivity-radius normalization (shortest nonzero vector of L* of
    length at least 1) is validated, not enforced by rescaling.
    """

    basis: np.ndarray
    name: str = ""
    validate: bool = True

    def __post_init__(self):
        arr = _as_square(self.basis)
        _check_nonsingular(arr)
        object.__setattr__(self, "basis", arr)
        if self.validate:
            sv = self.shortest_vector_length()
            if sv < 1.0 - 1e-12:
                raise LatticeError(
                    f"shortest nonzero vector of L* has length {sv:.6g} < 1; "
                    "rescale the basis so the injectivity radius is at least 1/2"
                )

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    @cached_property
    def digest(self) -> str:
        data = np.ascontiguousarray(self.basis, dtype="<f8").tobytes()
        return hashlib.sha256(data).hexdigest()

    def shortest_vector_length(self) -> float:
        # enumerate L* in a ball whose radius is the shortest basis column
        r = float(np.min(np.linalg.norm(self.basis, axis=0)))
        pts = _enumerate_ball(self.basis, r * (1 + 1e-9))
        nz = np.any(pts != 0, axis=1)
        lengths = np.linalg.norm(pts[nz] @ self.basis.T, axis=1)
        return float(lengths.min()) if lengths.size else r

    def to_dict(self) -> dict:
        return {"n": self.n, "basis": self.basis.tolist(), "name": self.name}


@dataclass(frozen=True, eq=False)
class DualBasis:
    """Generators of the dual lattice L as matrix columns."""

    basis: np.ndarray
    primal: LatticeBasis | None = None

    def __post_init__(self):
        object.__setattr__(self, "basis", _as_square(self.basis))

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    @property
    def torus_volume(self) -> float:
        """Volume V of the fundamental domain of L*."""
        if self.primal is not None:
            return self.primal.volume
        return 1.0 / self.volume

    @cached_property
    def gram(self) -> np.ndarray:
        return self.basis.T @ self.basis

    @cached_property
    def exact_gram(self) -> tuple[np.ndarray, int] | None:
        """Integer matrix G and denominator d with Gram(L) = G / d, if rational."""
        src = self.primal.basis if self.primal is not None else None
        if src is not None:
            rows = _rational_entries(src)
            if rows is None:
                return None
            n = len(rows)
            btb = [[sum(rows[k][i] * rows[k][j] for k in range(n)) for j in range(n)]
                   for i in range(n)]
            g = fraction_inverse(btb)
        else:
            rows = _rational_entries(self.basis)
            if rows is None:
                return None
            n = len(rows)
            g = [[sum(rows[k][i] * rows[k][j] for k in range(n)) for j in range(n)]
                 for i in range(n)]
        den = 1
        for row in g:
            for x in row:
                den = den * x.denominator // math.gcd(den, x.denominator)
        gint = np.array([[int(x * den) for x in row] for row in g], dtype=object)
        return gint, den

    @property
    def digest(self) -> str:
        if self.primal is not None:
            return self.primal.digest
        data = np.ascontiguousarray(self.basis, dtype="<f8").tobytes()
        return hashlib.sha256(b"dual" + data).hexdigest()


@dataclass(frozen=True)
class FreqPoint:
    k: tuple[int, ...]
    embed: np.ndarray = field(compare=False)
    radius: float = field(compare=False)


@dataclass(frozen=True)
class AnnulusSpec:
    lam: float
    delta: float
    kappa: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.delta < self.lam:
            raise ValueError("delta must be smaller than lambda")
        if self.kappa is not None:
            expect = delta_from_kappa(self.lam, self.kappa)
            if abs(expect - self.delta) > 1e-12 * expect:
                raise ValueError(
                    f"delta {self.delta} inconsistent with kappa {self.kappa} "
                    f"(expected {expect})"
                )

    @classmethod
    def from_kappa(cls, lam: float, kappa: float) -> "AnnulusSpec":
        return cls(lam, delta_from_kappa(lam, kappa), kappa)

    @property
    def lambda_delta(self) -> float:
        return self.lam * self.delta


class PointSet:
    """Frequency points stored column-wise; indexing yields ``FreqPoint``."""

    def __init__(self, k: np.ndarray, embed: np.ndarray, radius: np.ndarray):
        self.k = k
        self.embed = embed
        self.radius = radius

    def __len__(self):
        return self.k.shape[0]

    def __getitem__(self, i) -> FreqPoint:
        return FreqPoint(tuple(int(x) for x in self.k[i]), self.embed[i], float(self.radius[i]))

    def __iter__(self) -> Iterator[FreqPoint]:
        for i in range(len(self)):
            yield self[i]

    @property
    def n(self) -> int:
        return self.k.shape[1]

    @property
    def directions(self) -> np.ndarray:
        return self.embed / self.radius[:, None]

    def subset(self, idx) -> "PointSet":
        idx = np.asarray(idx, dtype=np.int64)
        return PointSet(self.k[idx], self.embed[idx], self.radius[idx])

    def index_of(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(x) for x in row): i for i, row in enumerate(self.k)}


def dual_basis(b: LatticeBasis) -> DualBasis:
    """Inverse-transpose of the primal basis, so that <e_i, e_j*> = delta_ij."""
    arr = b.basis
    sv = np.linalg.svd(arr, compute_uv=False)
    if sv[-1] <= 1e-12 * max(float(sv[0]), 1.0):
        raise LatticeError(f"singular basis: smallest singular value {sv[-1]:.3e}")
    return DualBasis(np.linalg.inv(arr).T, primal=b)


def delta_from_kappa(lam: float, kappa: float) -> float:
    if not (0 < kappa <= 1):
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    return float(lam ** (-1.0 + kappa))


def frequency_points(d: DualBasis, k: np.ndarray) -> PointSet:
    """Embed integer coordinates as frequencies 2*pi*k_L with radii."""
    k = np.asarray(k, dtype=np.int64).reshape(-1, d.n)
    embed = TWO_PI * (k @ d.basis.T)
    return PointSet(k, embed, _radii(d, k, embed))


def _radii(d: DualBasis, k: np.ndarray, embed: np.ndarray) -> np.ndarray:
    exact = d.exact_gram
    if exact is None or k.shape[0] == 0:
        return np.linalg.norm(embed, axis=1)
    gint, den = exact
    q = _quadform_int(gint, k)
    if max(abs(int(q.max())), 1) < 2**53 and den < 2**53:
        ratio = q.astype(np.float64) / float(den)
    else:
        ratio = np.array([float(Fraction(int(x), den)) for x in q])
    return TWO_PI * np.sqrt(ratio)


def _quadform_int(gint: np.ndarray, k: np.ndarray) -> np.ndarray:
    gmax = max(abs(int(x)) for x in gint.ravel())
    kmax = int(np.abs(k).max()) if k.size else 0
    n = k.shape[1]
    if gmax * kmax * kmax * n * n < 2**62:
        g64 = gint.astype(np.int64)
        return np.einsum("ij,jk,ik->i", k, g64, k)
    ko = k.astype(object)
    return np.array([int(row @ gint @ row) for row in ko], dtype=object)


def _cholesky_upper(gram: np.ndarray) -> np.ndarray:
    return np.linalg.cholesky(gram).T


def _expand(lo: np.ndarray, hi: np.ndarray):
    counts = np.maximum(hi - lo + 1, 0)
    parent = np.repeat(np.arange(lo.size), counts)
    starts = np.cumsum(counts) - counts
    offs = np.arange(parent.size) - np.repeat(starts, counts)
    return parent, lo[parent] + offs


def _enumerate_shell(gram: np.ndarray, r_lo: float, r_hi: float) -> np.ndarray:
    """Integer vectors with r_lo^2 <= k^T G k <= r_hi^2 (up to a margin).

    Fincke-Pohst style: coordinates are fixed from last to first, each level
    restricted to the interval allowed by the partial norm.  The final level
    skips the interior ball.  Candidates include a one-step margin and must be
    filtered exactly by the caller.
    """
    n = gram.shape[0]
    u = _cholesky_upper(gram)
    hi2 = r_hi * r_hi
    lo2 = r_lo * r_lo
    ks = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros(1)
    for i in range(n - 1, -1, -1):
        uii = u[i, i]
        shift = ks @ u[i, i + 1:][::-1] if ks.shape[1] else np.zeros(ks.shape[0])
        c = -shift / uii
        rem_hi = np.sqrt(np.maximum(hi2 - partial, 0.0)) / uii
        if i > 0 or lo2 <= 0:
            lo = np.floor(c - rem_hi).astype(np.int64) - 1
            hi = np.ceil(c + rem_hi).astype(np.int64) + 1
            parent, ki = _expand(lo, hi)
        else:
            rem_lo = np.sqrt(np.maximum(lo2 - partial, 0.0)) / uii
            # outer-left and outer-right pieces, margins included
            lo_a = np.floor(c - rem_hi).astype(np.int64) - 1
            hi_a = np.ceil(c - rem_lo).astype(np.int64) + 1
            lo_b = np.maximum(np.floor(c + rem_lo).astype(np.int64) - 1, hi_a + 1)
            hi_b = np.ceil(c + rem_hi).astype(np.int64) + 1
            pa, ka = _expand(lo_a, hi_a)
            pb, kb = _expand(lo_b, hi_b)
            parent = np.concatenate([pa, pb])
            ki = np.concatenate([ka, kb])
        t = uii * (ki - c[parent])
        partial = partial[parent] + t * t
        # ks columns are stored as (k_{n-1}, ..., k_i)
        ks = np.column_stack([ks[parent], ki])
        keep = partial <= hi2 * (1 + 1e-9) + 1e-9
        ks, partial = ks[keep], partial[keep]
    return ks[:, ::-1]


def _enumerate_ball(primal: np.ndarray, radius: float) -> np.ndarray:
    gram = primal.T @ primal
    ks = _enumerate_shell(gram, 0.0, radius)
    pts = ks @ primal.T
    return ks[np.linalg.norm(pts, axis=1) <= radius]


def candidate_estimate(d: DualBasis, a: AnnulusSpec) -> float:
    """Rough number of integer candidates the pruned scan will touch."""
    n = d.n
    cov = TWO_PI**n * d.volume
    unit = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    outer = a.lam + a.delta
    inner = max(a.lam - a.delta, 0.0)
    shell = unit * (outer**n - inner**n) / cov
    sigma_min = float(np.linalg.svd(d.basis, compute_uv=False)[-1])
    side = 2 * outer / (TWO_PI * sigma_min) + 3
    return shell + 4 * side ** (n - 1)


def enumerate_annulus(
    d: DualBasis, a: AnnulusSpec, max_candidates: float = DEFAULT_MAX_CANDIDATES
) -> PointSet:
    """All k with lam - delta < |2 pi k_L| < lam + delta, in lexicographic order.

    Radii use exact rational Gram arithmetic when the torus basis is rational,
    and plain double precision otherwise.
    """
    est = candidate_estimate(d, a)
    if est > max_candidates:
        raise ResourceLimitError(
            f"annulus enumeration would scan about {est:.3g} candidates "
            f"(cap {max_candidates:.3g})",
            estimate=est,
        )
    r_hi = (a.lam + a.delta) / TWO_PI
    r_lo = max(a.lam - a.delta, 0.0) / TWO_PI
    ks = _enumerate_shell(d.gram, r_lo * (1 - 1e-9), r_hi * (1 + 1e-9))
    pts = frequency_points(d, ks)
    keep = (pts.radius > a.lam - a.delta) & (pts.radius < a.lam + a.delta)
    k = pts.k[keep]
    order = np.lexsort(k.T[::-1]) if k.shape[0] else np.zeros(0, dtype=np.int64)
    return PointSet(k[order], pts.embed[keep][order], pts.radius[keep][order])


def brute_force_annulus(d: DualBasis, a: AnnulusSpec) -> np.ndarray:
    """Reference scan over the full integer box; used as a test oracle."""
    sigma_min = float(np.linalg.svd(d.basis, compute_uv=False)[-1])
    m = int(math.ceil((a.lam + a.delta) / (TWO_PI * sigma_min)))
    axes = [np.arange(-m, m + 1)] * d.n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d.n)
    pts = frequency_points(d, grid)
    keep = (pts.radius > a.lam - a.delta) & (pts.radius < a.lam + a.delta)
    k = grid[keep]
    return k[np.lexsort(k.T[::-1])] if k.shape[0] else k


def load_lattice(path) -> LatticeBasis:
    """Read a lattice config ``{"n": int, "basis": [[...]], "name": str}``.

    ``basis`` is the matrix in row-major order; its columns generate L*.
    """
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LatticeError(f"{path}: invalid JSON: {exc}") from exc
    return lattice_from_dict(obj, source=str(path))


def lattice_from_dict(obj, source: str = "<dict>") -> LatticeBasis:
    if not isinstance(obj, dict) or "basis" not in obj:
        raise LatticeError(f"{source}: expected an object with a 'basis' field")
    try:
        arr = np.array(obj["basis"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise LatticeError(f"{source}: basis is not a numeric matrix: {exc}") from exc
    n = obj.get("n", arr.shape[0] if arr.ndim else 0)
    if arr.ndim != 2 or arr.shape != (n, n):
        raise LatticeError(f"{source}: basis shape {arr.shape} does not match n={n}")
    return LatticeBasis(arr, name=str(obj.get("name", "")))


def save_lattice(b: LatticeBasis, path) -> None:
    with open(path, "w") as fh:
        json.dump(b.to_dict(), fh, indent=2)
        fh.write("\n")


def integer_lattice(n: int) -> LatticeBasis:
    return LatticeBasis(np.eye(n), name=f"Z{n}")


def as_int_array(points: Sequence[Sequence[int]] | np.ndarray, n: int | None = None) -> np.ndarray:
    arr = np.asarray(points, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, n or 1) if arr.size else arr.reshape(0, n or 1)
    return arr
