"""Representation counts, additive energy and exact L^p norms for even p.

Normalization: e_k(x) = V^{-1/2} exp(2 pi i <k_L, x>), so each basis
function has unit L^2 norm on the torus of volume V.  A product of m basis
functions is then V^{-(m-1)/2} times a single basis function, which is where
every V power below comes from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError
from .lattice import DualBasis

DEFAULT_MAX_PAIRS = 10**9
_CHUNK = 1 << 22


class CoeffSet:
    """Sparse Fourier coefficients indexed by integer dual-lattice coordinates.

    Zero amplitudes are dropped.  ``lattice`` identifies the dual basis the
    coordinates refer to; operations combining two sets require it to match.
    """

    def __init__(self, k, amp, lattice: DualBasis | None = None, n: int | None = None):
        k = np.asarray(k, dtype=np.int64)
        if k.ndim == 1:
            k = k.reshape(-1, n if n else (lattice.n if lattice is not None else 1))
        amp = np.asarray(amp, dtype=complex).reshape(-1)
        if k.shape[0] != amp.shape[0]:
            raise ValueError("coordinate and amplitude counts differ")
        keep = amp != 0
        k, amp = k[keep], amp[keep]
        if k.shape[0]:
            uniq, inv = np.unique(k, axis=0, return_inverse=True)
            if uniq.shape[0] != k.shape[0]:
                raise ValueError("duplicate frequencies in coefficient set")
            order = np.lexsort(k.T[::-1])
            k, amp = k[order], amp[order]
        self.k = k
        self.amp = amp
        self.lattice = lattice
        self.l2norm = float(np.sum(np.abs(amp) ** 2))

    @classmethod
    def from_dict(cls, entries: dict, lattice: DualBasis | None = None, n: int | None = None):
        if not entries:
            return cls(np.zeros((0, n or (lattice.n if lattice else 2)), np.int64), [], lattice)
        ks = list(entries)
        return cls(np.array(ks, dtype=np.int64), [entries[x] for x in ks], lattice)

    @property
    def n(self) -> int:
        return self.k.shape[1]

    def __len__(self):
        return self.k.shape[0]

    def as_dict(self) -> dict[tuple[int, ...], complex]:
        return {tuple(int(x) for x in row): complex(a) for row, a in zip(self.k, self.amp)}

    def norm2(self) -> float:
        return math.sqrt(self.l2norm)

    def normalized(self) -> "CoeffSet":
        s = self.norm2()
        if s == 0:
            raise ValueError("cannot normalize the zero function")
        return CoeffSet(self.k, self.amp / s, self.lattice)

    def restrict(self, mask: np.ndarray) -> "CoeffSet":
        return CoeffSet(self.k[mask], self.amp[mask], self.lattice)

    def __add__(self, other: "CoeffSet") -> "CoeffSet":
        _same_lattice(self, other)
        d = self.as_dict()
        for key, a in other.as_dict().items():
            d[key] = d.get(key, 0) + a
        return CoeffSet.from_dict({k: v for k, v in d.items() if v != 0}, self.lattice, self.n)


def _same_lattice(f: CoeffSet, g: CoeffSet) -> None:
    if f.lattice is not None and g.lattice is not None and f.lattice is not g.lattice:
        if f.lattice.digest != g.lattice.digest:
            raise ValueError("coefficient sets live on different lattices")
    if len(f) and len(g) and f.n != g.n:
        raise ValueError("coefficient sets have different dimensions")


@dataclass
class RepCountTable:
    sums: np.ndarray
    counts: np.ndarray
    s_max: int = field(init=False)

    def __post_init__(self):
        self.s_max = int(self.counts.max()) if self.counts.size else 0

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(x) for x in row): int(c) for row, c in zip(self.sums, self.counts)}

    @property
    def energy(self) -> int:
        return int(np.sum(self.counts.astype(object) ** 2)) if self.counts.size else 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self):
        return self.sums.shape[0]


def _pair_sums(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1])


def representation_counts(A, B, max_pairs: int = DEFAULT_MAX_PAIRS) -> RepCountTable:
    """r(c) = #{(a, b) in A x B : a + b = c} for every realized sum c."""
    a = np.asarray(A, dtype=np.int64)
    b = np.asarray(B, dtype=np.int64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("A and B must be 2-d integer arrays")
    if a.shape[0] * b.shape[0] > max_pairs:
        raise ResourceLimitError(
            f"|A||B| = {a.shape[0] * b.shape[0]} exceeds the pair cap {max_pairs}",
            estimate=a.shape[0] * b.shape[0],
        )
    if a.shape[0] == 0 or b.shape[0] == 0:
        n = a.shape[1] if a.ndim == 2 else b.shape[1]
        return RepCountTable(np.zeros((0, n), np.int64), np.zeros(0, np.int64))
    if len(np.unique(a, axis=0)) != a.shape[0] or len(np.unique(b, axis=0)) != b.shape[0]:
        raise ValueError("A and B must be duplicate-free")
    sums, counts = _group_sum(a, b, None, None)
    return RepCountTable(sums, counts.astype(np.int64))


def _group_sum(a, b, wa, wb):
    """Group pairwise sums of rows; accumulate counts or weight products."""
    rows_per = max(1, _CHUNK // max(b.shape[0], 1))
    parts_k, parts_v = [], []
    for s in range(0, a.shape[0], rows_per):
        sums = _pair_sums(a[s:s + rows_per], b)
        if wa is None:
            vals = np.ones(sums.shape[0], dtype=np.int64)
        else:
            vals = (wa[s:s + rows_per, None] * wb[None, :]).reshape(-1)
        u, inv = np.unique(sums, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        if wa is None:
            acc = np.bincount(inv, minlength=u.shape[0])
        else:
            acc = np.zeros(u.shape[0], dtype=complex)
            np.add.at(acc, inv, vals)
        parts_k.append(u)
        parts_v.append(acc)
    if len(parts_k) == 1:
        return parts_k[0], parts_v[0]
    u, inv = np.unique(np.concatenate(parts_k), axis=0, return_inverse=True)
    allv = np.concatenate(parts_v)
    acc = np.zeros(u.shape[0], dtype=allv.dtype)
    np.add.at(acc, inv.reshape(-1), allv)
    return u, acc


def convolve(f: CoeffSet, g: CoeffSet) -> CoeffSet:
    """Coefficients c -> sum over a + b = c of f(a) g(b) (no V factor)."""
    _same_lattice(f, g)
    if len(f) == 0 or len(g) == 0:
        return CoeffSet(np.zeros((0, f.n if len(f) else g.n), np.int64), [], f.lattice)
    k, v = _group_sum(f.k, g.k, f.amp, g.amp)
    return CoeffSet(k, v, f.lattice or g.lattice)


def additive_energy(A, B=None) -> int:
    t = representation_counts(A, A if B is None else B)
    return t.energy


@dataclass
class EnergyReport:
    energy: int
    s_max: int
    lhs: float
    rhs: float
    size_a: int = 0
    size_b: int = 0
    num_sums: int = 0

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-300

    @property
    def slack(self) -> float:
        return (self.rhs - self.lhs) / self.rhs if self.rhs > 0 else 0.0


def bilinear_l4(fA: CoeffSet, fB: CoeffSet, V: float = 1.0) -> EnergyReport:
    """Exact ||fA fB||_{L^2} against the representation-count bound.

    lhs = ||fA fB||_2 = (V^{-1} sum_c |sum_{a+b=c} fA(a) fB(b)|^2)^{1/2}
    rhs = s_max^{1/2} V^{-1/2} ||fA||_2 ||fB||_2

    lhs^{1/2} is the L^4 norm of (fA fB)^{1/2}; the inequality lhs <= rhs
    holds with constant 1 by two applications of Cauchy-Schwarz.
    """
    _same_lattice(fA, fB)
    table = representation_counts(fA.k, fB.k)
    prod = convolve(fA, fB)
    lhs = math.sqrt(prod.l2norm / V)
    rhs = math.sqrt(table.s_max / V) * fA.norm2() * fB.norm2()
    return EnergyReport(table.energy, table.s_max, lhs, rhs, len(fA), len(fB), len(table))


def exact_even_norm(f: CoeffSet, p: int, V: float = 1.0, max_terms: int = 10**8) -> float:
    """||f||_p for even p by (p/2)-fold coefficient convolution and Plancherel.

    ||f||_p^p = ||f^{p/2}||_2^2 = V^{1 - p/2} sum_c |g_c|^2, where g is the
    (p/2)-fold self-convolution of the coefficients.
    """
    if isinstance(p, float) and p.is_integer():
        p = int(p)
    if not isinstance(p, (int, np.integer)) or p < 2 or p % 2:
        raise ValueError(f"exact norm needs an even integer p >= 2, got {p}; use grid quadrature")
    if p > 8:
        raise ValueError("exact norms are supported for p in {2, 4, 6, 8}")
    m = p // 2
    if len(f) ** m > max_terms:
        raise ResourceLimitError(
            f"|supp f|^{m} = {len(f) ** m} exceeds {max_terms}", estimate=len(f) ** m
        )
    if len(f) == 0:
        return 0.0
    g = f
    for _ in range(m - 1):
        g = convolve(g, f)
    return float((V ** (1 - m) * g.l2norm) ** (1.0 / p))


@dataclass
class TransversalityRow:
    cap_a: int
    cap_b: int
    separation: float
    s_max: int
    bound: float
    lhs: float = math.nan
    rhs: float = math.nan


def angular_separation(u: np.ndarray, v: np.ndarray) -> float:
    c = float(np.clip(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)), -1.0, 1.0))
    return math.acos(c)


def transversality_experiment(
    cover,
    split,
    pts,
    far_pairs: set[tuple[int, int]] | None = None,
    cap_sector: np.ndarray | None = None,
    coeffs: CoeffSet | None = None,
    V: float = 1.0,
) -> list[TransversalityRow]:
    """s_max for bad-cap pairs at angular separation at least delta.

    Each unordered pair of distinct bad caps is examined once.  When
    ``far_pairs`` and ``cap_sector`` are given, only caps whose sectors form
    a far pair are kept.  With ``coeffs`` the bilinear L^4 comparison is also
    filled in for the pair.
    """
    lam, delta = cover.lam, cover.delta
    n = pts.n
    bound = (lam * delta) ** ((n - 2) / 2)
    bad = sorted(split.bad)
    rows = []
    lookup = coeffs.as_dict() if coeffs is not None else None
    for x in range(len(bad)):
        for y in range(x + 1, len(bad)):
            i, j = bad[x], bad[y]
            ci, cj = cover.caps[i], cover.caps[j]
            sep = angular_separation(ci.axis, cj.axis)
            if sep < delta:
                continue
            if far_pairs is not None and cap_sector is not None:
                if (int(cap_sector[i]), int(cap_sector[j])) not in far_pairs:
                    continue
            ka, kb = pts.k[ci.points], pts.k[cj.points]
            t = representation_counts(ka, kb)
            row = TransversalityRow(i, j, sep, t.s_max, bound)
            if lookup is not None:
                fa = CoeffSet(ka, [lookup.get(tuple(int(v) for v in r), 0) for r in ka], coeffs.lattice)
                fb = CoeffSet(kb, [lookup.get(tuple(int(v) for v in r), 0) for r in kb], coeffs.lattice)
                if len(fa) and len(fb):
                    rep = bilinear_l4(fa, fb, V)
                    row.lhs, row.rhs = rep.lhs, rep.rhs
            rows.append(row)
    return rows
