"""Per-cap lattice statistics, good/bad classification and bad-cap censuses."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import CapCover, build_cap_cover
from .lattice import (
    DEFAULT_MAX_CANDIDATES,
    AnnulusSpec,
    LatticeBasis,
    PointSet,
    dual_basis,
    enumerate_annulus,
)
from .errors import ResourceLimitError

CLASSIFY_CONST = 1.0
MAX_CAP_CONST = 4.0


def integer_rank(rows) -> int:
    """Rank over Q of an integer matrix, by fraction-free (Bareiss) elimination."""
    m = [[int(x) for x in row] for row in rows]
    if not m or not m[0]:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    prev = 1
    for col in range(ncols):
        piv = next((r for r in range(rank, nrows) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        for r in range(rank + 1, nrows):
            a = m[r][col]
            m[r] = [(p * x - a * y) // prev for x, y in zip(m[r], m[rank])]
            m[r][col] = 0
        prev = p
        rank += 1
        if rank == nrows:
            break
    return rank


def affine_dimension(k: np.ndarray) -> int:
    """Dimension of the affine hull of integer points (0 for at most one point)."""
    if k.shape[0] <= 1:
        return 0
    diffs = (k[1:] - k[0]).tolist()
    return integer_rank(diffs)


@dataclass
class CapStats:
    cap: int
    count: int
    dim: int


@dataclass
class GoodBadSplit:
    eta: float
    threshold: float
    good: list[int]
    bad: list[int]


def cap_stats(cover: CapCover, pts: PointSet) -> list[CapStats]:
    if cover.assignment.shape[0] != len(pts):
        raise ValueError(
            f"cover assigns {cover.assignment.shape[0]} points, point set has {len(pts)}"
        )
    out = []
    for j, cap in enumerate(cover.caps):
        k = pts.k[cap.points]
        out.append(CapStats(j, cap.count, affine_dimension(k)))
    return out


def bad_threshold(lam: float, delta: float, eta: float, n: int, const: float = CLASSIFY_CONST) -> float:
    return const * (lam * delta) ** ((n - 1) / 2 - eta)


def classify(
    stats: list[CapStats], lam: float, delta: float, eta: float, n: int,
    const: float = CLASSIFY_CONST,
) -> GoodBadSplit:
    """Bad caps hold at least const * (lam delta)^{(n-1)/2 - eta} points."""
    if not (0 < eta < 0.5):
        raise ValueError(f"eta must lie in (0, 1/2), got {eta}")
    thr = bad_threshold(lam, delta, eta, n, const)
    good, bad = [], []
    for s in stats:
        if s.count == 0:
            continue
        (bad if s.count >= thr else good).append(s.cap)
    return GoodBadSplit(eta, thr, good, bad)


def max_cap_check(stats: list[CapStats], lam: float, delta: float, n: int,
                  const: float = MAX_CAP_CONST) -> tuple[int, float, bool]:
    """Observed maximal cap count, the reference bound, and whether it holds."""
    if not stats:
        raise ValueError("no cap statistics")
    mx = max(s.count for s in stats)
    bound = const * (lam * delta) ** ((n - 1) / 2)
    return mx, bound, mx <= bound


def loglog_fit(x, y):
    """Least squares slope, intercept and slope standard error of log y on log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    m = lx.size
    if m < 2:
        return None
    a = np.column_stack([lx, np.ones(m)])
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    if m > 2:
        resid = ly - a @ coef
        s2 = float(resid @ resid) / (m - 2)
        cov = s2 * np.linalg.inv(a.T @ a)
        se = math.sqrt(max(cov[0, 0], 0.0))
    else:
        se = math.nan
    return float(coef[0]), float(coef[1]), se


@dataclass
class CensusRow:
    lam: float
    delta: float
    lambda_delta: float
    total_points: int
    num_caps: int
    max_cap_count: int
    num_bad: int
    bad_dims: dict[int, int]
    slope_so_far: float | None = None


@dataclass
class CensusReport:
    eta: float
    kappa: float
    n: int
    rows: list[CensusRow] = field(default_factory=list)
    slope: float | None = None
    intercept: float | None = None
    slope_stderr: float | None = None
    fit_note: str = ""
    truncated: bool = False
    truncation_note: str = ""

    CSV_HEADER = ("lambda", "delta", "lambda_delta", "total_points", "num_caps",
                  "max_cap_count", "num_bad", "slope_so_far")

    @property
    def bad_dim_histogram(self) -> dict[int, int]:
        h: dict[int, int] = {}
        for r in self.rows:
            for d, c in r.bad_dims.items():
                h[d] = h.get(d, 0) + c
        return dict(sorted(h.items()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([_fmt(r.lam), _fmt(r.delta), _fmt(r.lambda_delta), r.total_points,
                        r.num_caps, r.max_cap_count, r.num_bad,
                        "" if r.slope_so_far is None else _fmt(r.slope_so_far)])
        if self.truncated:
            w.writerow(["# truncated: " + self.truncation_note])
        return buf.getvalue()

    def to_json(self) -> str:
        obj = asdict(self)
        for r in obj["rows"]:
            r["bad_dims"] = {str(k): v for k, v in sorted(r["bad_dims"].items())}
        obj["bad_dim_histogram"] = {str(k): v for k, v in self.bad_dim_histogram.items()}
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def census_row(
    pts: PointSet, a: AnnulusSpec, eta: float, const: float = CLASSIFY_CONST,
    cover: CapCover | None = None,
) -> tuple[CensusRow, CapCover, list[CapStats], GoodBadSplit]:
    n = pts.n
    cover = cover or build_cap_cover(pts, a)
    stats = cap_stats(cover, pts)
    split = classify(stats, a.lam, a.delta, eta, n, const)
    dims: dict[int, int] = {}
    for j in split.bad:
        dims[stats[j].dim] = dims.get(stats[j].dim, 0) + 1
    row = CensusRow(
        lam=a.lam, delta=a.delta, lambda_delta=a.lambda_delta,
        total_points=len(pts), num_caps=len(cover),
        max_cap_count=max((s.count for s in stats), default=0),
        num_bad=len(split.bad), bad_dims=dict(sorted(dims.items())),
    )
    return row, cover, stats, split


def bad_cap_census(
    lattice: LatticeBasis,
    kappa: float,
    lambdas,
    eta: float,
    const: float = CLASSIFY_CONST,
    max_candidates: float = DEFAULT_MAX_CANDIDATES,
) -> CensusReport:
    """Enumerate, cover, classify at each lambda; fit numBad against lambda*delta.

    Rows with no bad caps are kept in the table but left out of the fit.  A
    resource-cap breach stops the run and marks the report truncated.
    """
    lambdas = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda list must be strictly increasing")
    if not (0 < eta < 0.5):
        raise ValueError(f"eta must lie in (0, 1/2), got {eta}")
    d = dual_basis(lattice)
    rep = CensusReport(eta=eta, kappa=kappa, n=lattice.n)
    for lam in lambdas:
        a = AnnulusSpec.from_kappa(lam, kappa)
        try:
            pts = enumerate_annulus(d, a, max_candidates)
            row, *_ = census_row(pts, a, eta, const)
        except ResourceLimitError as exc:
            rep.truncated = True
            rep.truncation_note = f"stopped at lambda={lam!r}: {exc}"
            break
        rep.rows.append(row)
        row.slope_so_far = _fit_rows(rep.rows)[0] if len(rep.rows) > 1 else None
    slope, icpt, se = _fit_rows(rep.rows)
    rep.slope, rep.intercept, rep.slope_stderr = slope, icpt, se
    used = sum(1 for r in rep.rows if r.num_bad > 0)
    if slope is None:
        rep.fit_note = f"fit undefined: {used} row(s) with bad caps"
    elif used < len(rep.rows):
        rep.fit_note = f"{len(rep.rows) - used} zero-count row(s) excluded from fit"
    return rep


def _fit_rows(rows):
    pos = [r for r in rows if r.num_bad > 0]
    if len(pos) < 2 or len({r.lambda_delta for r in pos}) < 2:
        return None, None, None
    return loglog_fit([r.lambda_delta for r in pos], [r.num_bad for r in pos])
