"""Directions on the sphere, angular sectors, cap covers and Whitney pairs."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial import QhullError
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .errors import CoverError, DecompositionError, ResourceLimitError
from .lattice import AnnulusSpec, PointSet

DEFAULT_CONE = 0.3
DEFAULT_R = 3
CAP_TANGENTIAL = 2.0
CAP_RADIAL = 4.0
MAX_MESH = 2**21
MAX_DIRECTIONS = 2e6

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(eq=False)
class DirectionSet:
    theta0: float
    dirs: np.ndarray
    cone: float | None = None

    def __len__(self):
        return self.dirs.shape[0]

    @property
    def n(self) -> int:
        return self.dirs.shape[1]

    def min_separation(self) -> float:
        if len(self) < 2:
            return math.inf
        d, _ = cKDTree(self.dirs).query(self.dirs, k=2)
        return float(d[:, 1].min())

    def covering_radius(self, samples: np.ndarray) -> float:
        """Largest distance from a sample to its nearest direction."""
        if self.cone is not None:
            samples = samples[in_cone(samples, self.cone)]
        if samples.shape[0] == 0:
            return 0.0
        d, _ = cKDTree(self.dirs).query(samples)
        return float(d.max())

    def to_dict(self) -> dict:
        return {"theta0": self.theta0, "cone": self.cone, "dirs": self.dirs.tolist()}


def in_cone(u: np.ndarray, aperture: float) -> np.ndarray:
    """Unit vectors within angle ``aperture`` of (0, ..., 0, 1)."""
    return u[:, -1] >= math.cos(aperture) - 1e-15


def sample_sphere(n: int, m: int, seed: int = 0, cone: float | None = None) -> np.ndarray:
    """``m`` random unit vectors, uniform on S^{n-1} or inside the cone."""
    rng = np.random.default_rng(seed)
    if cone is None:
        x = rng.standard_normal((m, n))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    # exponential map of a uniform disk in the tangent plane at the pole;
    # exact uniformity is not needed for covering checks, density is
    t = rng.standard_normal((m, n - 1))
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    ang = cone * rng.random(m) ** (1.0 / (n - 1))
    return np.column_stack([np.sin(ang)[:, None] * t, np.cos(ang)])


def _mesh(n: int, h: float, cone: float | None) -> np.ndarray:
    """Deterministic quasi-uniform mesh of S^{n-1} with spacing about h."""
    if n == 2:
        if cone is None:
            m = max(int(math.ceil(2 * math.pi / h)), 8)
            t = 2 * math.pi * np.arange(m) / m
        else:
            half = max(int(math.ceil(cone / h)), 1)
            steps = np.arange(1, half + 1) * (cone / half)
            t = math.pi / 2 + np.concatenate([[0.0], np.column_stack([steps, -steps]).ravel()])
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        zmin = -1.0 if cone is None else math.cos(cone)
        area = 2 * math.pi * (1 - zmin)
        m = max(int(math.ceil(area / (h * h))), 16)
        i = np.arange(m)
        z = 1.0 - (1.0 - zmin) * (i + 0.5) / m
        rho = np.sqrt(np.maximum(1 - z * z, 0.0))
        phi = i * _GOLDEN_ANGLE
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    m = int(min(max(area / h ** (n - 1), 64), 2**20))
    pts = qmc.Sobol(d=n, scramble=False).random_base2(int(math.ceil(math.log2(m + 1))))[1:]
    x = _normal.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    x = x[np.linalg.norm(x, axis=1) > 1e-9]
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    if cone is not None:
        x[:, -1] = np.abs(x[:, -1])
        x = x[in_cone(x, cone)]
        x = np.concatenate([np.eye(n)[-1:], x])
    return x


def _greedy(cands: np.ndarray, theta0: float, accepted: np.ndarray | None = None) -> np.ndarray:
    blocked = np.zeros(cands.shape[0], dtype=bool)
    tree = cKDTree(cands)
    # strictly closer than theta0 counts as blocked
    reach = theta0 * (1 - 1e-12)
    if accepted is not None and accepted.shape[0]:
        for nb in tree.query_ball_point(accepted, reach):
            blocked[nb] = True
    chosen = []
    for i in range(cands.shape[0]):
        if blocked[i]:
            continue
        chosen.append(i)
        blocked[tree.query_ball_point(cands[i], reach)] = True
    return cands[chosen]


def _holes(dirs: np.ndarray, n: int, cone: float | None) -> np.ndarray:
    """Candidate points farthest from ``dirs``: empty-cap centers."""
    if n == 2:
        ang = np.sort(np.arctan2(dirs[:, 1], dirs[:, 0]))
        if cone is None:
            gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
            mids = ang + gaps / 2
        else:
            lo, hi = math.pi / 2 - cone, math.pi / 2 + cone
            mids = np.concatenate([(ang[:-1] + ang[1:]) / 2, [lo, hi]])
        return np.column_stack([np.cos(mids), np.sin(mids)])
    cands = []
    if n + 1 < dirs.shape[0] <= 200000:
        try:
            hull = ConvexHull(dirs)
            normals = hull.equations[:, :-1]
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            cands.append(normals)
        except QhullError:
            pass
    if cone is not None:
        # holes cut by the cone boundary peak on the boundary sphere
        if n == 3:
            m = max(int(math.ceil(2 * math.pi * math.sin(cone) / 1e-3)), 64)
            t = 2 * math.pi * np.arange(m) / m
            ring = np.column_stack([np.cos(t), np.sin(t)])
        else:
            ring = sample_sphere(n - 1, 50000, seed=2)
        cands.append(np.column_stack([math.sin(cone) * ring, np.full(ring.shape[0], math.cos(cone))]))
    if n > 3 or not cands:
        cands.append(sample_sphere(n, 50000, seed=1, cone=cone))
    out = np.concatenate(cands)
    if cone is not None:
        out = out[in_cone(out, cone)]
    return out


def _cone_area(n: int, cone: float | None) -> float:
    full = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    if cone is None:
        return full
    if n == 2:
        return 2 * cone
    if n == 3:
        return 2 * math.pi * (1 - math.cos(cone))
    return full * min(1.0, cone ** (n - 1))


def build_direction_set(
    n: int, theta0: float, cone: float | None = None, max_directions: float = MAX_DIRECTIONS
) -> DirectionSet:
    """Maximal theta0-separated directions built greedily over a sphere mesh.

    The mesh has spacing theta0/8 (coarser for very fine sets).  Holes the mesh misses are found from the
    empty caps of the current set (gap midpoints on the circle, convex hull
    facet normals on S^2) and filled, so covering holds exactly rather than
    up to mesh resolution.
    """
    if not (0 < theta0 <= 2):
        raise ValueError(f"theta0 must lie in (0, 2], got {theta0}")
    if n < 2:
        raise ValueError("n must be at least 2")
    if cone is not None and not (0 < cone <= math.pi):
        raise ValueError(f"cone aperture must lie in (0, pi], got {cone}")
    area = _cone_area(n, cone)
    est = area / (0.75 * theta0) ** (n - 1)
    if est > max_directions:
        raise ResourceLimitError(
            f"about {est:.3g} directions needed at theta0={theta0} (cap {max_directions:.3g})",
            estimate=est,
        )
    # mesh spacing theta0/8, coarsened (never past theta0/2) to bound memory
    h = max(theta0 / 8, (area / MAX_MESH) ** (1.0 / (n - 1)))
    dirs = _greedy(_mesh(n, min(h, theta0 / 2), cone), theta0)
    for _ in range(100):
        cands = _holes(dirs, n, cone)
        if cands.shape[0] == 0:
            break
        d, _ = cKDTree(dirs).query(cands)
        far = cands[d >= theta0]
        if far.shape[0] == 0:
            break
        far = far[np.argsort(-d[d >= theta0], kind="stable")]
        dirs = np.concatenate([dirs, _greedy(far, theta0, dirs)])
    ds = DirectionSet(theta0, dirs, cone)
    if ds.min_separation() < theta0 * (1 - 1e-12):
        raise CoverError(f"separation {ds.min_separation():.6g} below theta0={theta0}")
    return ds


@dataclass
class SectorAssignment:
    owner: np.ndarray
    distance: np.ndarray

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.owner == j)

    def groups(self, count: int) -> list[np.ndarray]:
        order = np.argsort(self.owner, kind="stable")
        bounds = np.searchsorted(self.owner[order], np.arange(count + 1))
        return [order[bounds[j]:bounds[j + 1]] for j in range(count)]


def nearest_direction(u: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest direction per row of ``u``; ties go to the lower index."""
    if u.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    m = dirs.shape[0]
    kk = min(m, 6)
    _, idx = cKDTree(dirs).query(u, k=kk)
    idx = np.asarray(idx).reshape(u.shape[0], kk)
    dist = np.linalg.norm(u[:, None, :] - dirs[idx], axis=2)
    best = dist.min(axis=1, keepdims=True)
    # exact ties resolved by smallest direction index
    cand = np.where(dist == best, idx, np.iinfo(np.int64).max)
    owner = cand.min(axis=1)
    return owner.astype(np.int64), best[:, 0]


def assign_sectors(pts: PointSet, ds: DirectionSet) -> SectorAssignment:
    if len(pts) and np.any(pts.radius <= 0):
        raise ValueError("cannot assign the zero frequency to a sector")
    owner, dist = nearest_direction(pts.directions if len(pts) else np.zeros((0, ds.n)), ds.dirs)
    if dist.size and dist.max() > ds.theta0:
        bad = int(np.argmax(dist))
        raise CoverError(
            f"point {tuple(pts.k[bad])} lies {dist[bad]:.4g} from every direction "
            f"(theta0={ds.theta0})"
        )
    return SectorAssignment(owner, dist)


def householder_frame(nu: np.ndarray) -> np.ndarray:
    """Orthonormal symmetric frame whose last row is ``nu``."""
    n = nu.shape[0]
    e = np.zeros(n)
    e[-1] = 1.0
    w = e - nu
    ww = float(w @ w)
    if ww < 1e-30:
        return np.eye(n)
    return np.eye(n) - 2.0 * np.outer(w, w) / ww


@dataclass(eq=False)
class Cap:
    center: np.ndarray
    frame: np.ndarray
    halfwidths: np.ndarray
    points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def axis(self) -> np.ndarray:
        return self.frame[-1]

    @property
    def count(self) -> int:
        return int(self.points.size)

    def contains(self, embed: np.ndarray, slack: float = 0.0) -> np.ndarray:
        local = (embed - self.center) @ self.frame.T
        return np.all(np.abs(local) <= self.halfwidths * (1 + slack), axis=-1)

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "frame": self.frame.tolist(),
            "halfwidths": self.halfwidths.tolist(),
            "points": self.points.tolist(),
        }


@dataclass(eq=False)
class CapCover:
    caps: list[Cap]
    lam: float
    delta: float
    assignment: np.ndarray
    directions: DirectionSet | None = None

    def __len__(self):
        return len(self.caps)

    @property
    def counts(self) -> np.ndarray:
        return np.array([c.count for c in self.caps], dtype=np.int64)

    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.counts > 0)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "delta": self.delta,
            "assignment": self.assignment.tolist(),
            "caps": [c.to_dict() for c in self.caps if c.count],
            "cap_index": self.nonempty().tolist(),
        }


def cap_angular_scale(lam: float, delta: float) -> float:
    return math.sqrt(delta / lam)


def build_cap_cover(
    pts: PointSet,
    a: AnnulusSpec,
    cone: float | None = None,
    c_t: float = CAP_TANGENTIAL,
    c_r: float = CAP_RADIAL,
    directions: DirectionSet | None = None,
) -> CapCover:
    """One cap per direction at angular scale (delta/lam)^{1/2}.

    Boxes may overlap; each lattice point belongs to the cap of its angular
    cell, so the caps partition the annulus points.
    """
    lam, delta = a.lam, a.delta
    if not math.sqrt(lam * delta) < lam:
        raise ValueError("cap width (lam*delta)^{1/2} must be below lam")
    n = pts.n if len(pts) else (directions.n if directions is not None else 2)
    ds = directions or build_direction_set(n, cap_angular_scale(lam, delta), cone)
    sectors = assign_sectors(pts, ds)
    half = np.full(n, c_t * math.sqrt(lam * delta))
    half[-1] = c_r * delta
    groups = sectors.groups(len(ds))
    caps = []
    for j in range(len(ds)):
        nu = ds.dirs[j]
        caps.append(Cap(lam * nu, householder_frame(nu), half.copy(), groups[j]))
    cover = CapCover(caps, lam, delta, sectors.owner, ds)
    if len(pts):
        centers = lam * ds.dirs[sectors.owner]
        frames = np.stack([caps[j].frame for j in range(len(ds))])[sectors.owner] if len(ds) < 50000 else None
        if frames is not None:
            local = np.einsum("pij,pj->pi", frames, pts.embed - centers)
        else:
            local = np.array([caps[o].frame @ (e - c) for o, e, c in zip(sectors.owner, pts.embed, centers)])
        inside = np.all(np.abs(local) <= half * (1 + 1e-12), axis=1)
        if not inside.all():
            bad = int(np.flatnonzero(~inside)[0])
            raise CoverError(
                f"point {tuple(pts.k[bad])} escapes its cap: local coords {local[bad]}, "
                f"half-widths {half}"
            )
    return cover


@dataclass
class WhitneyPair:
    k: int
    mu: tuple[int, ...]
    mu_prime: tuple[int, ...]
    members: list[tuple[int, int]]

    def to_dict(self) -> dict:
        return {"k": self.k, "mu": list(self.mu), "mu_prime": list(self.mu_prime),
                "members": [list(m) for m in self.members]}


@dataclass
class WhitneyDecomposition:
    theta0: float
    r: int
    diagonal: list[tuple[int, int]]
    far: list[WhitneyPair]

    @property
    def levels(self) -> list[int]:
        return sorted({w.k for w in self.far})

    def far_members(self) -> set[tuple[int, int]]:
        return {m for w in self.far for m in w.members}

    def to_dict(self) -> dict:
        return {
            "theta0": self.theta0,
            "r": self.r,
            "diagonal": [list(p) for p in self.diagonal],
            "far": [w.to_dict() for w in self.far],
        }


def diagonal_mask(dirs: np.ndarray, theta0: float, r: int) -> np.ndarray:
    """Boolean matrix: (i, j) diagonal iff |nu_i - nu_j| < 2^r theta0."""
    d = np.linalg.norm(dirs[:, None, :] - dirs[None, :, :], axis=2)
    return d < (2**r) * theta0


def _cube_labels(p: np.ndarray, side: float) -> np.ndarray:
    return np.floor(p / side).astype(np.int64)


def close_cubes(mu: np.ndarray, mu_p: np.ndarray) -> np.ndarray:
    """Not adjacent at this level, yet inside adjacent cubes one level up."""
    apart = np.abs(mu - mu_p).max(axis=-1) >= 2
    parents = np.abs(np.floor_divide(mu, 2) - np.floor_divide(mu_p, 2)).max(axis=-1) <= 1
    return apart & parents


def max_close_neighbors(n: int) -> int:
    return 6 ** (n - 1) - 3 ** (n - 1)


def whitney_decompose(ds: DirectionSet, r: int = DEFAULT_R) -> WhitneyDecomposition:
    """Split ordered direction pairs into diagonal pairs and Whitney far pairs.

    Far pairs are grouped by the unique level k and close cubes (mu, mu') of
    side 2^k theta0 in {x_n = 0} containing the projections of the two
    directions.  Levels are not clipped at r: projection shortens chords, so
    the transition level of a far pair can sit a couple of steps below r.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    dirs = ds.dirs
    if np.any(dirs[:, -1] <= 0):
        raise ValueError("Whitney organization needs directions with positive last coordinate")
    n = ds.n
    diag = diagonal_mask(dirs, ds.theta0, r)
    ii, jj = np.nonzero(diag)
    diagonal = list(zip(ii.tolist(), jj.tolist()))
    fi, fj = np.nonzero(~diag)
    far: list[WhitneyPair] = []
    if fi.size == 0:
        return WhitneyDecomposition(ds.theta0, r, diagonal, far)
    proj = dirs[:, : n - 1]
    gap = np.abs(proj[fi] - proj[fj]).max(axis=1)
    if np.any(gap == 0):
        b = int(np.flatnonzero(gap == 0)[0])
        raise DecompositionError(f"far pair {(int(fi[b]), int(fj[b]))} has identical projections")
    k_lo = int(math.floor(math.log2(gap.min() / ds.theta0))) - 2
    k_hi = int(math.ceil(math.log2(4.0 / ds.theta0))) + 1
    hits = np.zeros(fi.size, dtype=np.int64)
    level = np.full(fi.size, np.iinfo(np.int64).min)
    mus = np.zeros((fi.size, n - 1), dtype=np.int64)
    mups = np.zeros((fi.size, n - 1), dtype=np.int64)
    base = _cube_labels(proj[fi], ds.theta0 * 2.0**k_lo)
    base_p = _cube_labels(proj[fj], ds.theta0 * 2.0**k_lo)
    if np.any(np.abs(base - base_p).max(axis=1) < 2):
        raise DecompositionError("starting level too coarse for some far pair")
    for k in range(k_lo, k_hi + 1):
        side = ds.theta0 * 2.0**k
        a = _cube_labels(proj[fi], side)
        b = _cube_labels(proj[fj], side)
        c = close_cubes(a, b)
        hits += c
        level[c] = k
        mus[c] = a[c]
        mups[c] = b[c]
    if np.any(hits != 1):
        b = int(np.flatnonzero(hits != 1)[0])
        raise DecompositionError(
            f"far pair {(int(fi[b]), int(fj[b]))} matches {int(hits[b])} Whitney triples"
        )
    groups: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
    for t in range(fi.size):
        key = (int(level[t]), tuple(mus[t].tolist()), tuple(mups[t].tolist()))
        groups[key].append((int(fi[t]), int(fj[t])))
    for key in sorted(groups):
        far.append(WhitneyPair(key[0], key[1], key[2], groups[key]))
    _audit_neighbors(far, n)
    return WhitneyDecomposition(ds.theta0, r, diagonal, far)


def _audit_neighbors(far: list[WhitneyPair], n: int) -> None:
    per: dict[tuple, set] = defaultdict(set)
    for w in far:
        per[(w.k, w.mu)].add(w.mu_prime)
    worst = max((len(v) for v in per.values()), default=0)
    if worst > max_close_neighbors(n):
        raise DecompositionError(f"a cube has {worst} close partners (bound {max_close_neighbors(n)})")


def audit_whitney(ds: DirectionSet, dec: WhitneyDecomposition) -> list[str]:
    """Independent re-check of a decomposition; returns a list of problems."""
    problems = []
    m = len(ds)
    bound = (2**dec.r) * ds.theta0
    seen = set()
    for i, j in dec.diagonal:
        if not np.linalg.norm(ds.dirs[i] - ds.dirs[j]) < bound:
            problems.append(f"diagonal pair {(i, j)} is not within 2^r theta0")
        seen.add((i, j))
    counts: dict[tuple[int, int], int] = defaultdict(int)
    n = ds.n
    for w in dec.far:
        side = ds.theta0 * 2.0**w.k
        mu, mup = np.array(w.mu), np.array(w.mu_prime)
        if not close_cubes(mu, mup):
            problems.append(f"cubes {w.mu} and {w.mu_prime} at level {w.k} are not close")
        sep = float(np.linalg.norm((mu - mup) * side))
        if not (side <= sep <= 4 * side * math.sqrt(n - 1)):
            problems.append(f"close cubes at level {w.k} have center distance {sep}")
        for i, j in w.members:
            counts[(i, j)] += 1
            if tuple(_cube_labels(ds.dirs[i, : n - 1], side)) != w.mu:
                problems.append(f"direction {i} outside cube {w.mu}")
            if tuple(_cube_labels(ds.dirs[j, : n - 1], side)) != w.mu_prime:
                problems.append(f"direction {j} outside cube {w.mu_prime}")
    for (i, j), c in counts.items():
        if c != 1:
            problems.append(f"far pair {(i, j)} appears {c} times")
        if (i, j) in seen:
            problems.append(f"pair {(i, j)} is both diagonal and far")
    if len(seen) + len(counts) != m * m:
        problems.append(f"{m * m - len(seen) - len(counts)} ordered pairs unaccounted for")
    return problems


def dumps(obj) -> str:
    return json.dumps(obj.to_dict(), sort_keys=True)
