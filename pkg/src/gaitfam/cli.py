"""Command-line driver.

Subcommands: scan, trace, surface, query, export, audit.  Exit codes:
0 success, 1 input or I/O error, 2 scan found no singular gaits,
3 query did not converge.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import archive, continuation, homotopy, hybrid, models
from .errors import GaitfamError, InputError, StalledDescentError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_EMPTY_SCAN = 2
EXIT_QUERY_FAILED = 3


def _parse_interval(text: str):
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError:
        raise InputError(f"interval must be 'a,b', got {text!r}") from None
    return a, b


def _equilibrium_point(model, index: int, tau: float = 0.5) -> hybrid.GaitPoint:
    eqs = models.equilibria(model)
    if not 0 <= index < len(eqs):
        raise InputError(f"equilibrium index {index} out of range (model has {len(eqs)})")
    return hybrid.point_for(model, eqs[index].vector, tau)


def _print_diagnostic(report: continuation.DiagnosticReport) -> None:
    print(f"classification: {report.classification}")
    print(f"max |I| over window: {report.max_abs_indicator:.3e}")
    print("indicator samples (tau, I):")
    for t, v in report.samples[:: max(1, len(report.samples) // 20)]:
        print(f"  {t:8.4f}  {v: .6e}")
    if report.remediation:
        print(f"suggestion: {report.remediation}")


def cmd_scan(args) -> int:
    model = models.load_model_config(args.model)
    c_eq = _equilibrium_point(model, args.equilibrium_index)
    seeds, samples = continuation.scan_singular(
        model, c_eq.x0.vector, c_eq.mu, interval=args.interval, steps=args.steps)
    report = continuation.classify_scan(samples, len(seeds))
    if not seeds:
        print("no isolated singular equilibrium gaits found")
        _print_diagnostic(report)
        return EXIT_EMPTY_SCAN
    print(f"found {len(seeds)} singular equilibrium gait(s) in "
          f"[{args.interval[0]}, {args.interval[1]}]:")
    for i, s in enumerate(seeds):
        print(f"  [{i}] tau = {s.indicator_root:.6f}   |I| = {abs(s.indicator_value):.2e}"
              f"   null dim = {s.null_dim}")
        if s.tangent is not None:
            print(f"      tangent: {np.array2string(s.tangent, precision=4)}")
    return EXIT_OK


def cmd_trace(args) -> int:
    model = models.load_model_config(args.model)
    c_eq = _equilibrium_point(model, args.equilibrium_index)
    family = continuation.build_family(
        model, c_eq, scan_interval=args.interval, count=args.count,
        h=args.step_size, steps=args.steps)
    if args.seed_index is not None:
        family.branches = [b for b in family.branches if b.seed_index == args.seed_index]
    doc = archive.family_to_dict(family)
    archive.save_archive(doc, args.out)
    if not family.seeds:
        print("no singular equilibrium gaits found; archive holds diagnostics only")
        _print_diagnostic(family.diagnostic)
        return EXIT_EMPTY_SCAN
    print(f"wrote {args.out}")
    print(f"{'branch':>6} {'seed tau':>10} {'sign':>5} {'gaits':>6} "
          f"{'slope range (deg)':>22} {'tau range (s)':>18}")
    for bi, b in enumerate(family.branches):
        if not b.gaits:
            print(f"{bi:>6} {'-':>10} {b.sign:>5} {0:>6}  ({b.status}: {b.message})")
            continue
        slopes = [math.degrees(g.slope) for g in b.gaits]
        taus = [g.tau for g in b.gaits]
        seed_tau = family.seeds[b.seed_index].indicator_root
        print(f"{bi:>6} {seed_tau:>10.4f} {b.sign:>5} {len(b.gaits):>6} "
              f"{min(slopes):>10.3f} .. {max(slopes):<8.3f} "
              f"{min(taus):>8.4f} .. {max(taus):<8.4f}")
    return EXIT_OK


def cmd_surface(args) -> int:
    model = models.load_model_config(args.model)
    if model.k < 1:
        raise InputError("surface construction needs a model with control parameters "
                         "(set 'actuated': true in the model config)")
    c_eq = _equilibrium_point(model, args.equilibrium_index)
    seeds, samples = continuation.scan_singular(
        model, c_eq.x0.vector, c_eq.mu, interval=args.interval, steps=args.steps)
    if not seeds:
        print("no singular equilibrium gaits found")
        _print_diagnostic(continuation.classify_scan(samples, 0))
        return EXIT_EMPTY_SCAN
    seed = seeds[args.seed_index or 0]
    depth = args.depth if args.depth is not None else model.k + 1
    result = continuation.multi_dim(model, seed, depth, count=args.count,
                                    h=args.step_size, inner_count=args.inner_count)
    doc = {
        "schema_version": archive.SCHEMA_VERSION,
        "model": dict(model.params),
        "kind": "surface",
        "seed": archive._seed_dict(seed),
        "depth": depth,
        "curves": [
            {
                "level": c.level,
                "parent": c.parent,
                "sign": c.sign,
                "map": c.map_kind,
                "status": c.status,
                "points": [p.tolist() for p in c.points],
            }
            for c in result.curves
        ],
    }
    archive.save_archive(doc, args.out)
    for level in range(1, depth + 1):
        pts = result.points_at_level(level)
        print(f"level {level}: {len(pts)} points "
              f"({sum(1 for c in result.curves if c.level == level)} curves)")
    print(f"wrote {args.out}")
    return EXIT_OK


def _pick_reference(doc: dict, model, spec: str | None) -> hybrid.GaitPoint:
    if spec and spec.startswith("equilibrium:"):
        index = int(spec.split(":", 1)[1])
        if model.n_u == 0:
            print("warning: seeding the query from an equilibrium of a model "
                  "without actuation; the query may have no solution nearby")
        return _equilibrium_point(model, index)
    branches = [b for b in doc.get("branches", []) if b["gaits"]]
    if not branches:
        raise InputError("archive holds no gaits to seed the query from")
    if spec:
        try:
            bi, gi = (int(p) for p in spec.split(":"))
        except ValueError:
            raise InputError(f"reference must be 'branch:index', got {spec!r}") from None
        try:
            g = doc["branches"][bi]["gaits"][gi]
        except IndexError:
            raise InputError(f"reference {spec!r} not present in archive") from None
    else:
        b = branches[0]
        g = b["gaits"][len(b["gaits"]) // 2]
    mu = list(g["mu"]) + [0.0] * (model.k - len(g["mu"]))
    return hybrid.point_for(model, np.asarray(g["x0"]), g["tau"], np.asarray(mu))


def cmd_query(args) -> int:
    model = models.load_model_config(args.model)
    doc = archive.load_archive(args.archive)
    constraints = homotopy.load_query(args.query)
    ref = _pick_reference(doc, model, args.reference)
    try:
        result = homotopy.ghm_solve(model, constraints, ref,
                                    max_iters=args.count or 50)
    except StalledDescentError as exc:
        print(f"query failed: {exc}")
        if exc.point is not None:
            print(f"last iterate: {np.array2string(np.asarray(exc.point), precision=6)}")
        return EXIT_QUERY_FAILED
    doc.setdefault("queries", []).append({
        "constraints": [
            {"quantity": q.name, "kind": q.kind, "target": q.target,
             "desired": q.desired}
            for q in constraints
        ],
        "reference": {"x0": ref.x0.vector.tolist(), "tau": ref.tau,
                      "mu": ref.mu.tolist()},
        "success": result.success,
        "message": result.message,
        "p_values": result.p_values,
        "path": [
            {"x0": s.point.x0.vector.tolist(), "tau": s.point.tau,
             "mu": s.point.mu.tolist(), "p": s.p,
             "slacks": s.slacks.tolist()}
            for s in result.states
        ],
    })
    out_path = args.out or args.archive
    archive.save_archive(doc, out_path)
    if not result.success:
        print(f"query failed: {result.message}")
        last = result.states[-1].point
        print(f"last iterate: x0={np.array2string(last.x0.vector, precision=6)} "
              f"tau={last.tau:.6f} mu={np.array2string(last.mu, precision=6)}")
        return EXIT_QUERY_FAILED
    root = result.root
    print(f"query solved in {len(result.states) - 1} steps: {result.message}")
    print(f"  x0  = {np.array2string(root.x0.vector, precision=8)}")
    print(f"  tau = {root.tau:.8f}")
    print(f"  mu  = {np.array2string(root.mu, precision=8)}")
    print(f"  slope = {models.slope(model, root):.3e} rad")
    print(f"updated archive written to {out_path}")
    return EXIT_OK


def cmd_export(args) -> int:
    doc = archive.load_archive(args.archive)
    fmt = args.format
    if fmt not in archive.EXPORTERS:
        raise InputError(f"unknown export format {fmt!r}; "
                         f"known: {sorted(archive.EXPORTERS)}")
    if fmt == "csv":
        rows = archive.export_csv(doc, args.out)
        print(f"wrote {rows} gait rows to {args.out}")
    elif fmt == "svg-bifurcation":
        archive.export_svg(doc, args.out)
        print(f"wrote bifurcation diagram to {args.out}")
    else:
        archive.export_frames(doc, args.out, fps=args.fps)
        print(f"wrote animation frames ({args.fps} fps) to {args.out}")
    return EXIT_OK


def cmd_audit(args) -> int:
    doc = archive.load_archive(args.archive)
    report = archive.audit_archive(doc)
    print(f"audited {report['gaits']} gaits: "
          f"max residual {report['max_residual']:.3e}, "
          f"max stored-value mismatch {report['max_mismatch']:.3e}")
    if not report["ok"]:
        print("audit FAILED")
        return EXIT_INPUT
    print("audit passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitfam",
        description="Find families of periodic walking gaits for hybrid biped "
                    "models by numerical continuation from equilibrium stances.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=True):
        if model:
            p.add_argument("--model", required=True, help="model config JSON file")
        p.add_argument("--interval", default="0.1,1.0",
                       help="step-duration scan window 'a,b' (default 0.1,1.0)")
        p.add_argument("--steps", type=int, default=100,
                       help="scan subdivisions (default 100)")
        p.add_argument("--equilibrium-index", type=int, default=0,
                       help="which model equilibrium to scan from")

    p = sub.add_parser("scan", help="locate singular equilibrium gaits")
    add_common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("trace", help="trace gait branches into an archive")
    add_common(p)
    p.add_argument("--count", type=int, default=250, help="gaits per branch")
    p.add_argument("--step-size", type=float, default=0.05,
                   help="arclength step (default 1/20)")
    p.add_argument("--seed-index", type=int, default=None,
                   help="keep only branches from this scan root")
    p.add_argument("--out", required=True, help="archive output path")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("surface", help="trace a multi-dimensional family")
    add_common(p)
    p.add_argument("--count", type=int, default=250, help="gaits per first-level curve")
    p.add_argument("--inner-count", type=int, default=None,
                   help="gaits per higher-level curve (default: same as --count)")
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--seed-index", type=int, default=0)
    p.add_argument("--depth", type=int, default=None,
                   help="family dimension (default k+1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("query", help="deform an archived gait to meet targets")
    p.add_argument("--model", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--query", required=True, help="query JSON file")
    p.add_argument("--reference", default=None,
                   help="'branch:index' into the archive or 'equilibrium:i'")
    p.add_argument("--count", type=int, default=None, help="iteration budget")
    p.add_argument("--out", default=None,
                   help="updated archive path (default: in place)")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("export", help="export an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--format", required=True,
                   help="csv | svg-bifurcation | animation-frames")
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=int, default=60)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("audit", help="re-check stored residuals")
    p.add_argument("--archive", required=True)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if isinstance(getattr(args, "interval", None), str):
            args.interval = _parse_interval(args.interval)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GaitfamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
