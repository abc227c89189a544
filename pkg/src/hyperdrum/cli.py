"""Command-line driver: scan, refine, validate, slice, sphere.

A thin sequential wrapper; the numerics live in the library modules.
Every output file starts with a schema-version header line and floats
carry 17 significant digits, so artifacts round-trip exactly and a
rerun with the same seed reproduces them byte for byte (the run
manifest, which records wall-clock timings, is provenance rather than
data and is exempt).  Exit codes: 0 success, 1 computational failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .basis import BasisError, evaluate_mode_many
from .formats import (FormatError, parse_manifold, read_mode,
                      read_scan_csv, read_spectrum, write_manifest,
                      write_mode, write_report, write_scan_csv,
                      write_slice_csv, write_sphere_csv)
from .geometry import GeometryError
from .solver import ScanConfig, ScanResult, SolverError, refine_all, scan
from .tiling import (TilingError, domain_volume_mc, estimate_diameter,
                     in_domain_many, matched_circle, membership_orbit)
from .validation import (ValidationError, check_bounds, circles_test,
                         goe_test, normalize_mode, overlap, weyl_staircase)

K_FLOOR = 0.25
WEYL_TOL = 0.15
OVERLAP_TOL = 0.05
GOE_TOL = 0.05
CIRCLES_TOL = 0.05
DIAMETER_SAMPLES = 2000
EVAL_CHUNK = 16384

_ERRORS = (SolverError, TilingError, ValidationError, FormatError,
           GeometryError, BasisError, OSError)


def _positive_float(text):
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _timer():
    stages = {}

    def mark(label, t0=[time.perf_counter()]):
        now = time.perf_counter()
        stages[label] = round(now - t0[0], 3)
        t0[0] = now

    return stages, mark


def _manifest(path, args, stages):
    cfg = {k: v for k, v in vars(args).items()
           if k not in ("func", "parser", "command")}
    write_manifest(path, {
        "command": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": cfg,
        "wall_time_s": round(sum(stages.values()), 3),
        "stages": stages,
    })


def _unique_pairs(gens):
    """One (label, isometry) per generator/inverse pair."""
    out = []
    for i, g in enumerate(gens.elements):
        if i <= gens.inverse_index[i]:
            out.append((gens.labels[i], g))
    return out


def _eval_chunked(mode, pts):
    vals = np.empty(len(pts))
    for start in range(0, len(pts), EVAL_CHUNK):
        sel = slice(start, start + EVAL_CHUNK)
        vals[sel] = evaluate_mode_many(mode, pts[sel])
    return vals


def cmd_scan(args, parser):
    if args.k_hi < args.k_lo:
        args.parser.error("empty k range: k-hi %g < k-lo %g"
                          % (args.k_hi, args.k_lo))
    if args.k_lo < K_FLOOR:
        args.parser.error("scan floor is k = %g (q^2 = %g); the basis "
                          "cannot represent smaller wavenumbers"
                          % (K_FLOOR, 1 + K_FLOOR ** 2))
    if args.k_lo < 1.0:
        print("warning: scanning near the k = %g floor; supercurvature "
              "modes with q^2 < 1 are invisible to a real-k scan"
              % K_FLOOR, file=sys.stderr)
    stages, mark = _timer()
    spec = parse_manifold(args.manifold)
    mark("parse")
    cfg = ScanConfig(args.k_lo, args.k_hi, dk=args.dk, d=args.points,
                     n_keep=args.n_keep, seed=args.seed)
    res = scan(spec, cfg, threads=args.threads)
    mark("scan")
    os.makedirs(args.out, exist_ok=True)
    params = [dict(L=int(res.L[i]), M=int(res.M[i]), N=int(res.N[i]),
                   rho_min=float(res.rho_min[i]),
                   rho_max=float(res.rho_max[i]))
              for i in range(len(res.ks))]
    echo = dict(k_lo=cfg.k_lo, k_hi=cfg.k_hi, dk=cfg.dk, d=cfg.d,
                l_min=cfg.l_min, n_keep=cfg.n_keep, seed=cfg.seed)
    csv = os.path.join(args.out, "scan.csv")
    write_scan_csv(csv, res.ks, res.chi2, params, config=echo)
    mark("write")
    _manifest(os.path.join(args.out, "manifest.txt"), args, stages)
    print("scan %s: %d grid points over k = [%g, %g], median chi^2 %.3e, "
          "wrote %s" % (spec.name, len(res.ks), cfg.k_lo, cfg.k_hi,
                        float(np.median(res.best)), csv))
    return 0


def cmd_refine(args, parser):
    stages, mark = _timer()
    spec = parse_manifold(args.manifold)
    ks, chi2, params, echo = read_scan_csv(args.scan)
    if echo is None:
        raise FormatError("%s: no config echo; regenerate the CSV with "
                          "the scan command" % args.scan)
    cfg = ScanConfig(**echo)
    res = ScanResult(manifold=spec.name, config=cfg, ks=ks,
                     sigma=np.sqrt(chi2),
                     L=np.array([p["L"] for p in params]),
                     M=np.array([p["M"] for p in params]),
                     N=np.array([p["N"] for p in params]),
                     rho_min=np.array([p["rho_min"] for p in params]),
                     rho_max=np.array([p["rho_max"] for p in params]))
    mark("parse")
    modes = refine_all(spec, res, cfg)
    mark("refine")
    os.makedirs(args.out, exist_ok=True)
    for i, mode in enumerate(modes):
        write_mode(os.path.join(args.out, "mode_%02d.txt" % i),
                   spec.name, mode.k, mode.multiplicity, mode.chi2,
                   mode.vectors, mode.L)
    summary = ["q2           " + " ".join("%10.6g" % m.q2 for m in modes),
               "multiplicity " + " ".join("%10d" % m.multiplicity
                                          for m in modes)]
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write("# hyperdrum-report 1 refine-summary\n"
                 + "\n".join(summary) + "\n")
    mark("write")
    _manifest(os.path.join(args.out, "manifest.txt"), args, stages)
    if not modes:
        print("warning: no chi^2 minima found in %s" % args.scan,
              file=sys.stderr)
    for line in summary:
        print(line)
    return 0


def _load_modes(args):
    return [read_mode(p) for p in args.modes or []]


def _validate_weyl(args, spec, recs):
    if args.spectrum:
        pairs = [(float(np.sqrt(max(q2 - 1.0, 0.0))), m)
                 for q2, m in read_spectrum(args.spectrum)]
    elif recs:
        pairs = [(rec["k"], rec["multiplicity"]) for rec in recs]
    else:
        args.parser.error("weyl check needs --modes or --spectrum")
    if spec.volume is not None:
        vol, vol_source = spec.volume, "metadata"
    else:
        vol, _ = domain_volume_mc(spec.gens, args.n_mc, args.seed)
        vol_source = "monte-carlo"
    st = weyl_staircase(pairs, vol)
    rel = abs(st.coeff - st.expected) / st.expected
    return {
        "n_modes": int(np.sum(st.mults)), "volume": vol,
        "volume_source": vol_source, "coeff": st.coeff,
        "offset": st.offset, "expected": st.expected,
        "rel_error": rel, "tolerance": WEYL_TOL,
        "passed": bool(rel < WEYL_TOL),
    }


def _validate_goe(args, spec, recs):
    if not recs:
        args.parser.error("goe check needs --modes")
    rows = []
    for rec, path in zip(recs, args.modes):
        rep = goe_test(rec["modes"][0], label=os.path.basename(path))
        rows.append({"mode": rep.label, "q2": rec["q2"],
                     "ks_stat": rep.ks_stat,
                     "passed": bool(rep.ks_stat < GOE_TOL)})
    return {"modes": rows, "tolerance": GOE_TOL,
            "passed": all(r["passed"] for r in rows)}


def _validate_ortho(args, spec, recs):
    if len(recs) < 2:
        args.parser.error("ortho check needs at least two --modes")
    normed = [normalize_mode(rec["modes"][0], spec.gens,
                             n_mc=args.n_mc, seed=args.seed)
              for rec in recs]
    rows = []
    worst = 0.0
    for i in range(len(normed)):
        for j in range(i + 1, len(normed)):
            ov = overlap(normed[i], normed[j], spec.gens,
                         n_mc=args.n_mc, seed=args.seed)
            worst = max(worst, abs(ov))
            rows.append({"i": i, "j": j, "q2_i": recs[i]["q2"],
                         "q2_j": recs[j]["q2"], "overlap": ov})
    return {"pairs": rows, "max_abs_overlap": worst,
            "tolerance": OVERLAP_TOL,
            "passed": bool(worst < OVERLAP_TOL)}


def _validate_circles(args, spec, recs):
    if not recs:
        args.parser.error("circles check needs --modes")
    rows = []
    for rec, path in zip(recs, args.modes):
        for label, g in _unique_pairs(spec.gens):
            try:
                mism, rms = circles_test(rec["modes"][0], g, args.rho)
            except TilingError:
                continue
            ratio = mism / rms
            rows.append({"mode": os.path.basename(path),
                         "q2": rec["q2"], "pair": label,
                         "rms_mismatch": mism, "rms_mode": rms,
                         "ratio": ratio,
                         "passed": bool(ratio < CIRCLES_TOL)})
    if not rows:
        raise ValidationError("no face pairing intersects the rho = %g "
                              "sphere; nothing to test" % args.rho)
    return {"rho": args.rho, "circles": rows, "tolerance": CIRCLES_TOL,
            "passed": all(r["passed"] for r in rows)}


def _validate_bounds(args, spec, recs):
    if not recs:
        args.parser.error("bounds check needs --modes")
    if spec.diameter is not None:
        D, d_source = spec.diameter, "metadata"
    else:
        D = estimate_diameter(spec.gens, DIAMETER_SAMPLES, args.seed)
        d_source = "estimate"
    rep = check_bounds(D, min(rec["q2"] for rec in recs))
    return {"diameter": rep.D, "diameter_source": d_source,
            "lower": rep.lower, "upper": rep.upper,
            "q2_1": rep.observed, "passed": bool(rep.passed)}


_CHECKS = {"weyl": _validate_weyl, "goe": _validate_goe,
           "ortho": _validate_ortho, "circles": _validate_circles,
           "bounds": _validate_bounds}


def cmd_validate(args, parser):
    stages, mark = _timer()
    spec = parse_manifold(args.manifold)
    recs = _load_modes(args)
    for rec in recs:
        if rec["manifold"] != spec.name:
            raise ValidationError("mode solved on %r, manifold file is %r"
                                  % (rec["manifold"], spec.name))
    mark("parse")
    payload = {"check": args.check, "manifold": spec.name,
               "seed": args.seed}
    payload.update(_CHECKS[args.check](args, spec, recs))
    mark("compute")
    os.makedirs(args.out, exist_ok=True)
    write_report(os.path.join(args.out, "report_%s.txt" % args.check),
                 args.check, payload)
    mark("write")
    _manifest(os.path.join(args.out, "manifest.txt"), args, stages)
    print("validate %s on %s: %s" % (args.check, spec.name,
                                     "pass" if payload["passed"] else "fail"))
    return 0


_PLANE_AXES = {"x": ("y", "z"), "y": ("x", "z"), "z": ("x", "y")}


def cmd_slice(args, parser):
    stages, mark = _timer()
    spec = parse_manifold(args.manifold)
    rec = read_mode(args.mode)
    if not 0 <= args.vector < len(rec["modes"]):
        args.parser.error("--vector %d out of range (multiplicity %d)"
                          % (args.vector, len(rec["modes"])))
    mode = rec["modes"][args.vector]
    orbit = membership_orbit(spec.gens)
    mark("parse")
    res = args.resolution
    u = -1.0 + (np.arange(res) + 0.5) * 2.0 / res
    A, B = np.meshgrid(u, u, indexing="ij")
    a, b = A.ravel(), B.ravel()
    ss = a * a + b * b
    disc = np.flatnonzero(ss < 1.0)
    # Poincare ball chart: x0 = (1+|v|^2)/(1-|v|^2), x_i = 2 v_i/(1-|v|^2)
    d = 1.0 - ss[disc]
    comp = {args.plane: np.zeros(len(disc))}
    ax1, ax2 = _PLANE_AXES[args.plane]
    comp[ax1] = 2.0 * a[disc] / d
    comp[ax2] = 2.0 * b[disc] / d
    pts = np.column_stack([(1.0 + ss[disc]) / d,
                           comp["x"], comp["y"], comp["z"]])
    inside = in_domain_many(pts, orbit)
    grid = np.full(res * res, np.nan)
    grid[disc[inside]] = _eval_chunked(mode, pts[inside])
    grid = grid.reshape(res, res)
    mark("evaluate")
    write_slice_csv(args.out, args.plane, (ax1, ax2), grid)
    mark("write")
    print("slice %s = 0 of %s: %d x %d grid, %d cells in the domain, "
          "wrote %s" % (args.plane, os.path.basename(args.mode), res, res,
                        int(inside.sum()), args.out))
    return 0


def cmd_sphere(args, parser):
    stages, mark = _timer()
    spec = parse_manifold(args.manifold)
    rec = read_mode(args.mode)
    if not 0 <= args.vector < len(rec["modes"]):
        args.parser.error("--vector %d out of range (multiplicity %d)"
                          % (args.vector, len(rec["modes"])))
    mode = rec["modes"][args.vector]
    mark("parse")
    res = args.resolution
    nphi = 2 * res
    # cylindrical equal-area chart: cells uniform in (phi, cos(theta))
    z = -1.0 + (np.arange(res) + 0.5) * 2.0 / res
    phi = (np.arange(nphi) + 0.5) * 2.0 * np.pi / nphi
    Z, P = np.meshgrid(z, phi, indexing="ij")
    zz, pp = Z.ravel(), P.ravel()
    s = np.sqrt(1.0 - zz * zz)
    sh, ch = np.sinh(args.rho), np.cosh(args.rho)
    pts = np.column_stack([np.full(zz.shape, ch), sh * s * np.cos(pp),
                           sh * s * np.sin(pp), sh * zz])
    amps = _eval_chunked(mode, pts)
    circles = []
    for label, g in _unique_pairs(spec.gens):
        try:
            alpha, fwd, back = matched_circle(g, args.rho)
        except TilingError:
            continue
        circles.append((label, alpha, fwd, back))
    mark("evaluate")
    write_sphere_csv(args.out, args.rho,
                     np.column_stack([pp, zz, amps]), circles)
    mark("write")
    print("sphere rho = %g of %s: %d samples, %d matched circle pairs, "
          "wrote %s" % (args.rho, os.path.basename(args.mode), len(amps),
                        len(circles), args.out))
    return 0


def _build_parser(default_seed):
    parser = argparse.ArgumentParser(
        prog="hyperdrum",
        description="Laplacian eigenmodes of compact hyperbolic "
                    "3-manifolds by nullspace detection.")
    parser.add_argument("--version", action="version",
                        version="hyperdrum %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="chi^2 residual over a k grid")
    p.add_argument("--manifold", required=True, help="manifold file")
    p.add_argument("--k-lo", type=float, required=True)
    p.add_argument("--k-hi", type=float, required=True)
    p.add_argument("--dk", type=_positive_float, default=0.01)
    p.add_argument("--points", type=_positive_int, default=20,
                   help="interior sample points")
    p.add_argument("--n-keep", type=_positive_int, default=5,
                   help="singular values kept per grid point")
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="scan worker-pool width")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_scan, parser=p)

    p = sub.add_parser("refine", help="pin eigenvalues at scan minima")
    p.add_argument("--manifold", required=True)
    p.add_argument("--scan", required=True, help="scan CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_refine, parser=p)

    p = sub.add_parser("validate", help="run one validation battery check")
    p.add_argument("--manifold", required=True)
    p.add_argument("--check", required=True, choices=sorted(_CHECKS))
    p.add_argument("--modes", nargs="+", help="eigenmode record files")
    p.add_argument("--spectrum", help="eigenvalue list fixture (weyl)")
    p.add_argument("--rho", type=_positive_float, default=1.0,
                   help="sphere radius for the circles check")
    p.add_argument("--n-mc", type=_positive_int, default=100000,
                   help="Monte Carlo samples for integrals")
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_validate, parser=p)

    p = sub.add_parser("slice", help="mode amplitude on a Poincare-ball "
                                     "coordinate plane")
    p.add_argument("--manifold", required=True)
    p.add_argument("--mode", required=True, help="eigenmode record file")
    p.add_argument("--plane", required=True, choices=sorted(_PLANE_AXES))
    p.add_argument("--resolution", type=_positive_int, default=101)
    p.add_argument("--vector", type=int, default=0,
                   help="which vector of a degenerate mode")
    p.add_argument("--out", required=True, help="output CSV file")
    p.set_defaults(func=cmd_slice, parser=p)

    p = sub.add_parser("sphere", help="mode amplitude on a geodesic "
                                      "sphere, equal-area projected")
    p.add_argument("--manifold", required=True)
    p.add_argument("--mode", required=True, help="eigenmode record file")
    p.add_argument("--rho", type=_positive_float, default=1.0)
    p.add_argument("--resolution", type=_positive_int, default=64,
                   help="polar cells; azimuth gets twice as many")
    p.add_argument("--vector", type=int, default=0,
                   help="which vector of a degenerate mode")
    p.add_argument("--out", required=True, help="output CSV file")
    p.set_defaults(func=cmd_sphere, parser=p)
    return parser


def main(argv=None) -> int:
    raw = os.environ.get("HYPERDRUM_SEED")
    try:
        default_seed = int(raw) if raw is not None else 0
    except ValueError:
        print("error: HYPERDRUM_SEED must be an integer, got %r" % raw,
              file=sys.stderr)
        return 2
    parser = _build_parser(default_seed)
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except _ERRORS as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
