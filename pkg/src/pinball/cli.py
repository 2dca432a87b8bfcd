"""Command-line interface.

Every subcommand that writes a CSV embeds the full command line and all
tolerances in the metadata block, so a file documents how to regenerate
itself. Exit codes: 0 success, 2 bad arguments, 3 every trajectory left
the domain.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import _kernels as _k
from . import analysis, scan
from .dynamics import PhasePoint, trajectory
from .errors import NoConvergence, NotPeriodic, PinballError
from .stability import orbit_monodromy
from .tables import make_table, three_pointed_egg

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ESCAPED = 3


def _range_type(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected lo:hi:step, got {text!r}") from None
    if step <= 0.0 or hi < lo:
        raise argparse.ArgumentTypeError("need step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _grid_type(text: str):
    try:
        w, h = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected WxH, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("grid sides must be positive")
    return w, h


def _guess_type(text: str):
    points = []
    for chunk in text.split(";"):
        u, phi = (float(part) for part in chunk.split(","))
        points.append((u, phi))
    if not points:
        raise argparse.ArgumentTypeError("empty orbit guess")
    return points


def _add_table_args(p, default="cardioid"):
    p.add_argument("--table", default=default,
                   choices=["circle", "ellipse", "cardioid", "cuspless",
                            "egg"])
    p.add_argument("--a", type=float, default=2.0,
                   help="ellipse horizontal semi-axis")
    p.add_argument("--alpha", type=float, default=0.08,
                   help="egg perturbation strength")


def _add_run_args(p, n_default):
    p.add_argument("--n", type=int, default=n_default)
    p.add_argument("--discard", type=int, default=5_000)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinball",
        description="Dissipative pinball billiards: simulation and scans.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attractor", help="sample one attractor")
    _add_table_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_run_args(p, 20_000)
    p.add_argument("--u0", type=float)
    p.add_argument("--phi0", type=float)
    p.add_argument("--out")

    p = sub.add_parser("lyapunov", help="Lyapunov exponents")
    _add_table_args(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--lambda-range", dest="lam_range", type=_range_type)
    p.add_argument("--ics", type=int, default=1)
    _add_run_args(p, 100_000)
    p.add_argument("--out")

    p = sub.add_parser("basin", help="classify a phase-space grid")
    _add_table_args(p, default="cuspless")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--grid", type=_grid_type, default=(200, 200),
                   metavar="WxH")
    p.add_argument("--n", type=int, default=2_000)
    p.add_argument("--discard", type=int, default=2_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("bifurcation", help="attractor sweep over contraction")
    _add_table_args(p, default="egg")
    p.add_argument("--lambda-range", dest="lam_range", type=_range_type,
                   required=True)
    p.add_argument("--ics", type=int, default=100)
    _add_run_args(p, 100_000)
    p.add_argument("--keep", type=int, default=40)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("phase-diagram",
                       help="chaotic-or-not over an (alpha, lambda) grid")
    p.add_argument("--table", default="egg", choices=["egg"])
    p.add_argument("--alpha-range", dest="alpha_range", type=_range_type,
                   required=True)
    p.add_argument("--lambda-range", dest="lam_range", type=_range_type,
                   required=True)
    p.add_argument("--ics", type=int, default=100)
    _add_run_args(p, 100_000)
    p.add_argument("--early-exit", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("crisis", help="attractor components and chaotic fraction")
    p.add_argument("--table", default="egg", choices=["egg"])
    p.add_argument("--alpha", type=float, default=0.08)
    p.add_argument("--lambda-range", dest="lam_range", type=_range_type,
                   required=True)
    p.add_argument("--ics", type=int, default=12)
    p.add_argument("--n", type=int, default=40_000)
    p.add_argument("--discard", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("orbit", help="Newton search for a periodic orbit")
    _add_table_args(p, default="egg")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--period", type=int)
    p.add_argument("--guess", type=_guess_type, required=True,
                   metavar="u,phi[;u,phi...]")
    p.add_argument("--out")

    p = sub.add_parser("slap", help="the contraction-zero boundary map")
    _add_table_args(p)
    p.add_argument("--n", type=int, default=10_000, help="grid size")
    p.add_argument("--out")

    p = sub.add_parser("shoot",
                       help="corner shooting on the cuspless table")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--phi", type=float)
    p.add_argument("--collisions", type=int, default=4)
    p.add_argument("--search", action="store_true",
                   help="locate the critical contraction and angle")

    p = sub.add_parser("portrait", help="elastic phase portrait")
    _add_table_args(p, default="egg")
    p.add_argument("--ics", type=int, default=40)
    p.add_argument("--n", type=int, default=2_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    return parser


_UNRECORDED_FLAGS = ("--threads", "--out")


def _meta(args, argv, table=None, **extra):
    # record the command without the flags that cannot affect the numbers
    # (thread count, destination path), so reruns that differ only in those
    # produce byte-identical files
    kept = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in _UNRECORDED_FLAGS:
            skip = True
            continue
        if tok.startswith(tuple(f + "=" for f in _UNRECORDED_FLAGS)):
            continue
        kept.append(tok)
    return scan.base_metadata(table, command="pinball " + " ".join(kept),
                              **extra)


def _cmd_attractor(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    if (args.u0 is None) != (args.phi0 is None):
        print("--u0 and --phi0 must be given together", file=sys.stderr)
        return EXIT_USAGE
    if args.u0 is not None:
        x0 = PhasePoint(table.wrap(args.u0), args.phi0)
    else:
        us, phis = analysis.random_phase_points(table, 1, args.seed)
        x0 = PhasePoint(float(us[0]), float(phis[0]))
    seg = trajectory(args.lam, table, x0, args.n, discard=args.discard)
    if len(seg) == 0:
        print(f"trajectory left the domain during transient "
              f"({seg.reason})", file=sys.stderr)
        return EXIT_ESCAPED
    if seg.terminated:
        print(f"trajectory truncated after {len(seg)} collisions "
              f"({seg.reason})", file=sys.stderr)
    if args.out:
        rows = [(table.coordinate(float(u)), math.sin(float(phi)))
                for u, phi in zip(seg.u, seg.phi)]
        scan.write_csv(args.out, ["coord", "sin_phi"], rows,
                       _meta(args, argv, table, **{"lambda": args.lam},
                             n=args.n, discard=args.discard, seed=args.seed))
        print(f"wrote {len(seg)} collisions to {args.out}")
    else:
        print(f"sampled {len(seg)} collisions; pass --out to save them")
    return EXIT_OK


def _cmd_lyapunov(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    lams = [args.lam] if args.lam is not None else list(args.lam_range)
    rows = []
    for i, lam in enumerate(lams):
        us, phis = analysis.random_phase_points(table, args.ics, args.seed,
                                                stream=i)
        for j in range(args.ics):
            est = analysis.lyapunov(float(lam), table,
                                    PhasePoint(float(us[j]), float(phis[j])),
                                    n=args.n, discard=args.discard)
            rows.append((float(lam), est.nu_plus, est.nu_minus, est.n_used))
    if all(row[3] == 0 for row in rows):
        print("every trajectory left the domain", file=sys.stderr)
        return EXIT_ESCAPED
    header = ["lambda", "nu_plus", "nu_minus", "n_used"]
    if args.out:
        scan.write_csv(args.out, header, rows,
                       _meta(args, argv, table, n=args.n,
                             discard=args.discard, seed=args.seed,
                             ics=args.ics))
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(scan._fmt(v) for v in row))
    return EXIT_OK


def _cmd_basin(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    w, h = args.grid
    half = 0.5 * table.u_period
    u_axis = -half + table.u_period * (np.arange(w) + 0.5) / w
    phi_axis = -0.5 * math.pi + math.pi * (np.arange(h) + 0.5) / h
    res = analysis.classify_basin(args.lam, table, u_axis, phi_axis,
                                  n=args.n, discard=args.discard,
                                  threads=args.threads)
    if np.all(res.labels == 2):
        print("every grid cell escaped", file=sys.stderr)
        return EXIT_ESCAPED
    rows = []
    for i in range(w):
        coord = table.coordinate(float(u_axis[i]))
        for j in range(h):
            rows.append((coord, math.sin(float(phi_axis[j])),
                         int(res.labels[i, j]), float(res.nu_plus[i, j])))
    counts = {int(k): int((res.labels == k).sum()) for k in (0, 1, 2)}
    print(f"labels: {counts[0]} regular, {counts[1]} chaotic, "
          f"{counts[2]} escaped")
    if args.out:
        scan.write_csv(args.out, ["coord", "sin_phi", "label", "nu_plus"],
                       rows, _meta(args, argv, table,
                                   **{"lambda": args.lam}, grid=f"{w}x{h}",
                                   n=args.n, discard=args.discard,
                                   seed=args.seed))
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_bifurcation(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    spec = scan.SweepSpec(args.lam_range, n_ics=args.ics, n=args.n,
                          discard=args.discard, seed=args.seed)
    rows, escaped, total = scan.bifurcation_scan(table, spec, keep=args.keep,
                                                 threads=args.threads)
    if escaped == total:
        print("every trajectory left the domain", file=sys.stderr)
        return EXIT_ESCAPED
    if escaped:
        print(f"{escaped}/{total} trajectories left the domain",
              file=sys.stderr)
    if args.out:
        scan.write_csv(args.out,
                       ["lambda", "coord", "sin_phi", "period", "nu_plus"],
                       rows, _meta(args, argv, table,
                                   lambda_range=_fmt_range(args.lam_range),
                                   ics=args.ics, n=args.n,
                                   discard=args.discard, seed=args.seed,
                                   keep=args.keep))
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(f"computed {len(rows)} rows; pass --out to save them")
    return EXIT_OK


def _fmt_range(values) -> str:
    return f"{float(values[0])!r}..{float(values[-1])!r} ({len(values)} values)"


def _cmd_phase_diagram(args, argv):
    spec = scan.SweepSpec(args.lam_range, n_ics=args.ics, n=args.n,
                          discard=args.discard, seed=args.seed)
    rows = scan.phase_diagram(three_pointed_egg, args.alpha_range, spec,
                              threads=args.threads,
                              early_exit=args.early_exit)
    if args.out:
        scan.write_csv(args.out,
                       ["alpha", "lambda", "any_chaotic", "max_nu_plus"],
                       rows, _meta(args, argv, None,
                                   alpha_range=_fmt_range(args.alpha_range),
                                   lambda_range=_fmt_range(args.lam_range),
                                   ics=args.ics, n=args.n,
                                   discard=args.discard, seed=args.seed,
                                   early_exit=args.early_exit))
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        chaotic = sum(r[2] for r in rows)
        print(f"{chaotic}/{len(rows)} cells chaotic; pass --out to save")
    return EXIT_OK


def _cmd_crisis(args, argv):
    table = three_pointed_egg(args.alpha)
    spec = scan.SweepSpec(args.lam_range, n_ics=args.ics, n=args.n,
                          discard=args.discard, seed=args.seed)
    rows = scan.crisis_scan(table, spec, threads=args.threads)
    if args.out:
        scan.write_csv(args.out,
                       ["lambda", "component_count", "chaotic_fraction"],
                       rows, _meta(args, argv, table,
                                   lambda_range=_fmt_range(args.lam_range),
                                   ics=args.ics, n=args.n,
                                   discard=args.discard, seed=args.seed))
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        for lam, comp, frac in rows:
            print(f"lambda={lam:g}: components={comp} "
                  f"chaotic_fraction={frac:g}")
    return EXIT_OK


def _cmd_orbit(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    guess = args.guess if len(args.guess) > 1 else args.guess[0]
    try:
        orbit = analysis.find_periodic_orbit(args.lam, table, guess,
                                             period=args.period)
        report = orbit_monodromy(args.lam, table, orbit)
    except (NoConvergence, NotPeriodic) as exc:
        print(f"orbit search failed: {exc}", file=sys.stderr)
        return 1
    for i, x in enumerate(orbit):
        print(f"point {i}: u={x.u!r} phi={x.phi!r}")
    print(f"trace={report.trace!r} det={report.det!r}")
    print(f"eigenvalues={report.eigenvalues[0]!r}, "
          f"{report.eigenvalues[1]!r}")
    print(f"classification: {report.classification}")
    if args.out:
        rows = [(i, x.u, table.coordinate(x.u), x.phi)
                for i, x in enumerate(orbit)]
        scan.write_csv(args.out, ["index", "u", "coord", "phi"], rows,
                       _meta(args, argv, table, **{"lambda": args.lam},
                             period=len(orbit), trace=report.trace,
                             det=report.det,
                             classification=report.classification))
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_slap(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    half = 0.5 * table.u_period
    rows = []
    worst = math.inf
    for i in range(args.n):
        u = -half + table.u_period * (i + 0.5) / args.n
        r = _k._step(*table._packed(), 0.0, table.wrap(u), 0.0)
        if r[-1] != _k.OK:
            continue
        u1, tau, eta, K0 = r[0], r[3], r[2], r[5]
        deriv = -(tau * K0 + 1.0) / math.cos(eta)
        rows.append((u, table.coordinate(u), u1, table.coordinate(u1),
                     deriv))
        second = _k._step(*table._packed(), 0.0, u1, 0.0)
        if second[-1] == _k.OK:
            deriv2 = -(second[3] * second[5] + 1.0) / math.cos(second[2])
            worst = min(worst, abs(deriv * deriv2))
    print(f"min |(T0 o T0)'| over {args.n} grid points: {worst!r}")
    if args.out:
        scan.write_csv(args.out,
                       ["u", "coord", "image_u", "image_coord",
                        "derivative"],
                       rows, _meta(args, argv, table, n=args.n))
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_shoot(args, argv):
    if args.search:
        lam_star, phi_star = analysis.cuspless_critical_search()
        print(f"critical contraction: {lam_star!r}")
        print(f"critical angle: {phi_star!r}")
        return EXIT_OK
    if args.phi is None:
        print("provide --phi or --search", file=sys.stderr)
        return EXIT_USAGE
    try:
        s4 = analysis.cuspless_shoot(args.lam, args.phi,
                                     collisions=args.collisions)
    except PinballError as exc:
        print(f"shot left the domain: {exc}", file=sys.stderr)
        return EXIT_ESCAPED
    corner = -_k.WALL_HALF
    print(f"arc position after {args.collisions} collisions: {s4!r}")
    print(f"distance to the upper discontinuity: {s4 - corner!r}")
    return EXIT_OK


def _cmd_portrait(args, argv):
    table = make_table(args.table, args.a, args.alpha)
    rows = scan.hamiltonian_portrait(table, n_ics=args.ics, n=args.n,
                                     seed=args.seed)
    if not rows:
        print("every trajectory left the domain", file=sys.stderr)
        return EXIT_ESCAPED
    if args.out:
        scan.write_csv(args.out, ["ic", "coord", "sin_phi"], rows,
                       _meta(args, argv, table, ics=args.ics, n=args.n,
                             seed=args.seed, **{"lambda": 1.0}))
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(f"computed {len(rows)} rows; pass --out to save them")
    return EXIT_OK


_COMMANDS = {
    "attractor": _cmd_attractor,
    "lyapunov": _cmd_lyapunov,
    "basin": _cmd_basin,
    "bifurcation": _cmd_bifurcation,
    "phase-diagram": _cmd_phase_diagram,
    "crisis": _cmd_crisis,
    "orbit": _cmd_orbit,
    "slap": _cmd_slap,
    "shoot": _cmd_shoot,
    "portrait": _cmd_portrait,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, argv)
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
