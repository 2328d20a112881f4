"""Command line interface: ``bench``, ``position`` and ``verify``."""
import argparse
import sys

import numpy as np

from . import bench
from .oracle import NotConvex, check_convex, clip_convex_volume, monte_carlo_volumes
from .positioning import PositionQuery, Status, position, position_newton_baseline
from .shapes import load_shape
from .truncation import PlaneFrame, precompute, truncated_volume

EXIT_EXCEEDED = 2


def _point(text):
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise argparse.ArgumentTypeError("need three finite components")
    return v


def _vector(text):
    v = _point(text)
    if not np.any(v):
        raise argparse.ArgumentTypeError("normal must not be the zero vector")
    return v


def _count(text):
    n = float(text)
    if n != int(n) or n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(n)


def _load(args):
    kwargs = {"strict_table1": True} if args.strict_table1 and args.shape == "torus" else {}
    return args.shape, load_shape(args.shape, **kwargs)


def cmd_bench(args):
    name, poly = _load(args)
    grid = bench.generate_grid(args.m_normal, args.m_vof)
    records, agg = bench.run_benchmark(poly, grid, args.method, args.tol, name=name)
    bench.emit(records, args.format, args.out)
    per_alpha, heat = bench.emit_aggregates(agg, grid, args.out)
    print(f"shape={name} method={args.method} instances={len(records)}")
    print(f"N_av={agg.n_av:.4f} (std {agg.n_std:.3f})  t_av={agg.t_av / 1000:.3f} us")
    print(f"fallback={agg.n_fallback} exceeded_tol={agg.n_exceeded}")
    print(f"wrote {args.out}, {per_alpha}, {heat}")
    return EXIT_EXCEEDED if agg.n_exceeded else 0


def cmd_position(args):
    name, poly = _load(args)
    co = precompute(poly, args.normal, base=args.base)
    query = PositionQuery(co, args.alpha, eps=args.tol)
    run = position_newton_baseline if args.method == "newton" else position
    res = run(query, trace=args.trace)
    print(f"shape={name} s_min={co.s_min:.17g} s_max={co.s_max:.17g}")
    print(f"s*={res.s:.17g} alpha={res.alpha:.17g} |error|={abs(res.alpha - args.alpha):.3e}")
    print(f"n_trunc={res.n_trunc} status={res.status.name}")
    if args.trace:
        for i, (s, a, step) in enumerate(res.trace):
            print(f"  {i:3d} {step.name:<12s} s={s:.17g} alpha={a:.17g}")
    exceeded = abs(res.alpha - args.alpha) > args.tol and res.status != Status.BOUNDARY_CLAMPED
    return EXIT_EXCEEDED if exceeded else 0


def cmd_verify(args):
    """Compare truncated volumes with the oracles on random planes."""
    name, poly = _load(args)
    rng = np.random.default_rng(args.seed)
    base = poly.centroid
    frames, exact = [], []
    for _ in range(args.planes):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        co = precompute(poly, n, base=base)
        s = float(rng.uniform(co.s_min, co.s_max))
        frames.append(PlaneFrame(n, base, s))
        exact.append(truncated_volume(co, s).V)
    frames.append(PlaneFrame(np.array([0.0, 0.0, 1.0]), base, 2.0 * poly.diameter))
    exact.append(poly.volume)

    bad = 0
    try:
        check_convex(poly)
        convex = True
    except NotConvex:
        convex = False
    if convex:
        worst = max(abs(clip_convex_volume(poly, f) - v) for f, v in zip(frames, exact))
        ok = worst <= 1e-10 * poly.volume
        bad += not ok
        print(f"clip oracle: max |dV| = {worst:.3e} ({'ok' if ok else 'FAIL'})")
    else:
        print("clip oracle: skipped (shape is not convex)")

    est = monte_carlo_volumes(poly, frames, args.samples, args.seed)
    for f, v, e in zip(frames, exact, est):
        z = (e.mean - v) / e.stderr if e.stderr > 0 else (0.0 if e.mean == v else np.inf)
        ok = abs(z) <= 3.0
        bad += not ok
        print(f"s={f.s:+.6f} V={v:.10f} MC={e.mean:.10f} +- {e.stderr:.2e} z={z:+.2f} {'ok' if ok else 'FAIL'}")
    print(f"shape={name} samples={args.samples} seed={args.seed} failures={bad}")
    return EXIT_EXCEEDED if bad else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="plicpos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    shape_help = "cube, cuboid, tetra, dodeca, torus, letterA or file:<path>"
    strict_help = "torus: keep every grid cell as one quad, relaxing the planarity tolerance"

    b = sub.add_parser("bench", help="run the (normal, fraction) benchmark sweep")
    b.add_argument("--shape", required=True, help=shape_help)
    b.add_argument("--m-normal", type=int, default=80)
    b.add_argument("--m-vof", type=int, default=50)
    b.add_argument("--method", choices=bench.METHODS, default="proposed")
    b.add_argument("--tol", type=float, default=1e-12)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--out", required=True)
    b.add_argument("--strict-table1", action="store_true", help=strict_help)
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("position", help="position one plane")
    p.add_argument("--shape", required=True, help=shape_help)
    p.add_argument("--normal", type=_vector, required=True, help="x,y,z")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--base", type=_point, default=None, help="reference point, default centroid")
    p.add_argument("--method", choices=bench.METHODS, default="proposed")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--strict-table1", action="store_true", help=strict_help)
    p.set_defaults(func=cmd_position)

    v = sub.add_parser("verify", help="cross-check truncated volumes with the oracles")
    v.add_argument("--shape", required=True, help=shape_help)
    v.add_argument("--samples", type=_count, default=10**7)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--planes", type=int, default=10)
    v.add_argument("--strict-table1", action="store_true", help=strict_help)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
