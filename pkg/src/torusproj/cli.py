"""Command-line experiment runner.

Subcommands: enumerate, census, fit, energy, whitney.  Exit codes are
0 on success, 1 on a failed audit or inequality, 2 on invalid input and
3 when a resource cap is hit.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cache import EnumerationCache
from .census import CLASSIFY_CONST, MAX_CAP_CONST, CensusReport, census_row, max_cap_check, _fit_rows, loglog_fit
from .energy import CoeffSet, transversality_experiment
from .errors import LatticeError, ResourceLimitError
from .geometry import DEFAULT_CONE, DEFAULT_R, audit_whitney, build_direction_set, whitney_decompose
from .lattice import AnnulusSpec, dual_basis, load_lattice
from .norms import FAMILIES, FitResult, FitRow, _norm_any, family_member, low_exponent

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def parse_lambdas(args) -> list[float]:
    if args.dyadic:
        try:
            lo, hi = (int(x) for x in args.dyadic.split(":"))
        except ValueError:
            raise InputError(f"--dyadic expects A:B with integers, got {args.dyadic!r}")
        if hi < lo:
            raise InputError("--dyadic needs A <= B")
        return [2 * math.pi * 2.0**j for j in range(lo, hi + 1)]
    if args.lam:
        out = []
        for tok in args.lam.split(","):
            tok = tok.strip()
            try:
                if tok.startswith("2pi*"):
                    out.append(2 * math.pi * float(tok[4:]))
                else:
                    out.append(float(tok))
            except ValueError:
                raise InputError(f"cannot parse lambda value {tok!r}")
        return out
    raise InputError("give --lambda LIST or --dyadic A:B")


def _annulus(args, lam: float) -> AnnulusSpec:
    if args.delta is not None:
        return AnnulusSpec(lam, args.delta)
    return AnnulusSpec.from_kappa(lam, args.kappa)


class Run:
    """Collects artifacts and timings, then writes the manifest."""

    def __init__(self, command: str, args):
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func")}
        if getattr(args, "lattice", None):
            try:
                cfg["lattice_content"] = hashlib.sha256(Path(args.lattice).read_bytes()).hexdigest()
            except OSError:
                pass
        self.config = cfg
        self.config_hash = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
        self.started = datetime.now(timezone.utc).isoformat()
        self.stages: dict[str, float] = {}
        self.artifacts: list[dict] = []
        self.cache = EnumerationCache()
        self.notes: list[str] = []

    def stage(self, name: str, seconds: float) -> None:
        self.stages[name] = self.stages.get(name, 0.0) + seconds

    def write(self, name: str, text: str) -> Path:
        p = self.out / name
        data = text.encode()
        p.write_bytes(data)
        self.artifacts.append({"path": name, "sha256": hashlib.sha256(data).hexdigest()})
        return p

    def finish(self, status: int) -> int:
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "version": __version__,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "stages": self.stages,
            "cache_hits": self.cache.hits,
            "cache_misses": self.cache.misses,
            "artifacts": self.artifacts,
            "notes": self.notes,
            "exit_code": status,
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
        return status


def _timed(run: Run, name, fn, *a, **kw):
    t0 = time.perf_counter()
    try:
        return fn(*a, **kw)
    finally:
        run.stage(name, time.perf_counter() - t0)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) if not isinstance(x, str) else x for x in r])
    return buf.getvalue()


def cmd_enumerate(args) -> int:
    lattice = load_lattice(args.lattice)
    d = dual_basis(lattice)
    run = Run("enumerate", args)
    summary = []
    for i, lam in enumerate(parse_lambdas(args)):
        a = _annulus(args, lam)
        pts = _timed(run, "enumerate", run.cache.enumerate, d, a, args.max_points)
        header = [f"k{j}" for j in range(d.n)] + ["radius"]
        rows = [list(map(int, k)) + [r] for k, r in zip(pts.k, pts.radius)]
        name = f"points_{i:03d}.csv"
        run.write(name, _csv(header, rows))
        summary.append([a.lam, a.delta, len(pts), name])
    run.write("enumerate.csv", _csv(["lambda", "delta", "count", "file"], summary))
    return run.finish(EXIT_OK)


def cmd_census(args) -> int:
    lattice = load_lattice(args.lattice)
    d = dual_basis(lattice)
    lambdas = parse_lambdas(args)
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise InputError("lambda list must be strictly increasing")
    run = Run("census", args)
    rep = CensusReport(eta=args.eta, kappa=args.kappa, n=lattice.n)
    status = EXIT_OK
    max_rows = []
    for lam in lambdas:
        a = _annulus(args, lam)
        try:
            pts = _timed(run, "enumerate", run.cache.enumerate, d, a, args.max_points)
        except ResourceLimitError as exc:
            rep.truncated = True
            rep.truncation_note = f"stopped at lambda={lam!r}: {exc}"
            status = EXIT_RESOURCE
            break
        row, cover, stats, split = _timed(run, "census", census_row, pts, a, args.eta, args.bad_const)
        rep.rows.append(row)
        row.slope_so_far = _fit_rows(rep.rows)[0] if len(rep.rows) > 1 else None
        mx, bound, ok = max_cap_check(stats, a.lam, a.delta, lattice.n, args.max_cap_const)
        max_rows.append([a.lam, mx, bound, ok])
    slope, icpt, se = _fit_rows(rep.rows)
    rep.slope, rep.intercept, rep.slope_stderr = slope, icpt, se
    used = sum(1 for r in rep.rows if r.num_bad > 0)
    rep.fit_note = (f"fit undefined: {used} row(s) with bad caps" if slope is None
                    else f"{len(rep.rows) - used} zero-count row(s) excluded from fit")
    run.write("census.csv", rep.to_csv())
    run.write("census.json", rep.to_json())
    run.write("max_cap.csv", _csv(["lambda", "max_cap_count", "bound", "within_bound"], max_rows))
    return run.finish(status)


def cmd_fit(args) -> int:
    lattice = load_lattice(args.lattice)
    lambdas = parse_lambdas(args)
    if len(lambdas) < 4:
        raise InputError("an exponent fit needs at least 4 lambda values")
    d = dual_basis(lattice)
    run = Run("fit", args)
    rows = []
    for lam in lambdas:
        a = _annulus(args, lam)
        pts = _timed(run, "enumerate", run.cache.enumerate, d, a, args.max_points)
        f = _timed(run, "family", family_member, args.family, pts, a, d, args.seed)
        val, ok = _timed(run, "norm", _norm_any, f, args.p, lattice.volume)
        rows.append(FitRow(lam, a.delta, a.lambda_delta, len(f), val, val / f.norm2(), ok is not False))
    fit = loglog_fit([r.lambda_delta for r in rows], [r.ratio for r in rows])
    flagged = not all(r.converged for r in rows)
    res = FitResult(args.family, args.p, lattice.n, fit[0], fit[1], fit[2], float(low_exponent(args.p, lattice.n)),
                    rows, flagged, "convergence gate failed for some rows" if flagged else "")
    header = ["family", "lambda", "delta", "p", "norm", "ratio", "log_lambda_delta", "log_ratio", "converged"]
    table = [[args.family, r.lam, r.delta, args.p, r.norm, r.ratio,
              math.log(r.lambda_delta), math.log(r.ratio), r.converged] for r in rows]
    run.write("norms.csv", _csv(header, table))
    summary = {"family": res.family, "p": res.p, "n": res.n, "slope": res.slope, "intercept": res.intercept,
               "stderr": res.stderr, "reference_exponent": res.reference, "flagged": res.flagged, "note": res.note,
               "rows": [{"lambda": r.lam, "delta": r.delta, "norm": r.norm, "ratio": r.ratio,
                         "converged": r.converged} for r in rows]}
    run.write("fit.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    run.write("fit.csv", _csv(["family", "p", "slope", "intercept", "stderr", "reference", "flagged"],
                              [[res.family, res.p, res.slope, res.intercept, res.stderr, res.reference, res.flagged]]))
    return run.finish(EXIT_FAIL if flagged else EXIT_OK)


def cmd_energy(args) -> int:
    lattice = load_lattice(args.lattice)
    d = dual_basis(lattice)
    run = Run("energy", args)
    rng = np.random.default_rng(args.seed)
    table = []
    violated = False
    for lam in parse_lambdas(args):
        a = _annulus(args, lam)
        pts = _timed(run, "enumerate", run.cache.enumerate, d, a, args.max_points)
        _, cover, stats, split = _timed(run, "census", census_row, pts, a, args.eta, args.bad_const)
        coeffs = CoeffSet(pts.k, rng.choice([-1.0, 1.0], size=len(pts)), d)
        rows = _timed(run, "transversality", transversality_experiment, cover, split, pts,
                      coeffs=coeffs, V=lattice.volume)
        if not split.bad:
            run.notes.append(f"lambda={lam!r}: no bad caps")
        for r in rows:
            holds = r.lhs <= r.rhs * (1 + 1e-12)
            violated |= not holds
            table.append([f"{lam!r}:{r.cap_a}-{r.cap_b}", lam, r.separation, r.s_max, r.bound, r.lhs, r.rhs, holds])
    header = ["pair_id", "lambda", "sep", "s_max", "bound", "lhs", "rhs", "holds"]
    run.write("energy.csv", _csv(header, table))
    if violated:
        run.notes.append("bilinear L^4 inequality violated")
    return run.finish(EXIT_FAIL if violated else EXIT_OK)


def cmd_whitney(args) -> int:
    lattice = load_lattice(args.lattice)
    if args.theta0 is None:
        lambdas = parse_lambdas(args)
        theta0 = _annulus(args, lambdas[0]).delta
    else:
        theta0 = args.theta0
    run = Run("whitney", args)
    ds = _timed(run, "directions", build_direction_set, lattice.n, theta0, args.cone)
    dec = _timed(run, "decompose", whitney_decompose, ds, args.r)
    problems = _timed(run, "audit", audit_whitney, ds, dec)
    run.write("directions.json", json.dumps(ds.to_dict(), sort_keys=True) + "\n")
    run.write("whitney.json", json.dumps(dec.to_dict(), sort_keys=True) + "\n")
    rows = [[w.k, " ".join(map(str, w.mu)), " ".join(map(str, w.mu_prime)), len(w.members)] for w in dec.far]
    run.write("whitney.csv", _csv(["k", "mu", "mu_prime", "members"], rows))
    run.write("audit.txt", "".join(p + "\n" for p in problems) or "ok\n")
    run.notes.append(f"{len(ds)} directions, {len(dec.diagonal)} diagonal pairs, {len(dec.far)} Whitney pairs")
    return run.finish(EXIT_FAIL if problems else EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torusproj", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, lam_required=True):
        p.add_argument("--lattice", required=True, help="lattice JSON file")
        p.add_argument("--kappa", type=float, default=0.5)
        p.add_argument("--delta", type=float, default=None, help="explicit window, overrides --kappa")
        g = p.add_mutually_exclusive_group(required=lam_required)
        g.add_argument("--lambda", dest="lam", help="comma list; entries may be written 2pi*X")
        g.add_argument("--dyadic", help="A:B, meaning lambda = 2 pi 2^j for j = A..B")
        p.add_argument("--out", required=True)
        p.add_argument("--max-points", type=float, default=1e8)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("enumerate", help="lattice points in annuli")
    common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("census", help="bad-cap census and slope fit")
    common(p)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--bad-const", type=float, default=CLASSIFY_CONST)
    p.add_argument("--max-cap-const", type=float, default=MAX_CAP_CONST)
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("fit", help="L^p growth exponent of a test family")
    common(p)
    p.add_argument("--p", type=float, default=None, help="default: critical exponent")
    p.add_argument("--family", choices=FAMILIES, default="knapp")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("energy", help="bilinear L^4 check over bad-cap pairs")
    common(p)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--bad-const", type=float, default=CLASSIFY_CONST)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("whitney", help="diagonal/far split with Whitney audit")
    common(p, lam_required=False)
    p.add_argument("--theta0", type=float, default=None, help="default: delta of the first lambda")
    p.add_argument("--r", type=int, default=DEFAULT_R)
    p.add_argument("--cone", type=float, default=DEFAULT_CONE)
    p.set_defaults(func=cmd_whitney)
    return ap


def _validate(args) -> None:
    if hasattr(args, "eta") and not (0 < args.eta < 0.5):
        raise InputError(f"eta must lie in (0, 1/2), got {args.eta}")
    if args.delta is None and not (0 < args.kappa <= 1):
        raise InputError(f"kappa must lie in (0, 1], got {args.kappa}")
    if getattr(args, "command", None) == "fit" and args.p is None:
        n = load_lattice(args.lattice).n
        args.p = 2.0 * (n + 1) / (n - 1)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    try:
        _validate(args)
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"torusproj: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InputError, LatticeError, ValueError, OSError) as exc:
        print(f"torusproj: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
