"""Content-addressed on-disk cache for annulus enumerations."""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .lattice import DualBasis, AnnulusSpec, PointSet, enumerate_annulus, frequency_points, DEFAULT_MAX_CANDIDATES

ENV_VAR = "TORUSPROJ_CACHE_DIR"


def cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "torusproj"


def enumeration_key(d: DualBasis, a: AnnulusSpec) -> str:
    payload = json.dumps(
        {"basis": d.digest, "lambda": float(a.lam).hex(), "delta": float(a.delta).hex()},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


class EnumerationCache:
    """JSON files of integer k-vectors keyed by (basis hash, lambda, delta).

    Only the integer coordinates are stored; embeddings and radii are
    recomputed from them, so a hit is bit-identical to a fresh enumeration.
    """

    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else cache_dir()
        self.hits = 0
        self.misses = 0

    def path(self, key: str) -> Path:
        return self.root / "enum" / f"{key}.json"

    def get(self, d: DualBasis, a: AnnulusSpec) -> PointSet | None:
        p = self.path(enumeration_key(d, a))
        if not p.exists():
            return None
        try:
            obj = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError):
            return None
        k = np.array(obj["k"], dtype=np.int64).reshape(-1, d.n)
        return frequency_points(d, k)

    def put(self, d: DualBasis, a: AnnulusSpec, pts: PointSet) -> None:
        key = enumeration_key(d, a)
        p = self.path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        obj = {"basis": d.digest, "lambda": a.lam, "delta": a.delta, "k": pts.k.tolist()}
        tmp = p.with_suffix(f".tmp{os.getpid()}")
        tmp.write_text(json.dumps(obj))
        os.replace(tmp, p)

    def enumerate(self, d: DualBasis, a: AnnulusSpec, max_candidates=DEFAULT_MAX_CANDIDATES) -> PointSet:
        pts = self.get(d, a)
        if pts is not None:
            self.hits += 1
            return pts
        self.misses += 1
        pts = enumerate_annulus(d, a, max_candidates)
        self.put(d, a, pts)
        return pts
