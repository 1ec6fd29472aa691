"""Command line interface: ``nclg run | sweep | compare``."""
import argparse
import csv
import json
import logging
import sys

from .harness import convergence_sweep, pulse_problem, simulate
from .scheme import VARIANTS


def _add_common(p):
    p.add_argument("--N", type=int, default=16, help="segments per edge")
    p.add_argument("--k", type=int, default=2, help="polynomial degree (1..5)")
    p.add_argument("--q", type=int, default=2, help="BDF order (1..5)")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--startup", choices=("exact", "rk"), default="exact")
    p.add_argument("--quad-degree", type=int, default=None)
    p.add_argument("--quad-refine", type=int, default=1,
                   help="split each element into n^2 pieces for the transported integrals")
    p.add_argument("--rk-substeps", type=int, default=4)
    p.add_argument("--split", choices=("diagonal", "crisscross"), default="diagonal")


def _header(fh, args, keys):
    for k in keys:
        fh.write(f"# {k}={getattr(args, k)}\n")


def _open_out(path):
    return open(path, "w", newline="") if path and path != "-" else sys.stdout


def cmd_run(args):
    problem = pulse_problem(args.mu)
    rep, _ = simulate(problem, args.N, args.k, args.q, args.dt, args.variant, args.startup,
                      args.quad_degree, args.rk_substeps, args.split, T=args.T, a0=args.a0,
                      quad_refine=args.quad_refine)
    fh = _open_out(args.out)
    try:
        _header(fh, args, ["N", "k", "q", "dt", "mu", "a0", "T", "variant", "startup",
                           "quad_degree", "quad_refine", "rk_substeps", "split"])
        fh.write(f"# e_L2={rep.e_l2!r} e_m={rep.e_m!r} eh_L2={rep.eh_l2!r} eh_m={rep.eh_m!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mass", "e_L2_inst"])
        for t, m, e in zip(rep.times, rep.mass, rep.e_l2_inst):
            w.writerow([repr(t), repr(m), repr(e)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_sweep(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    problem = pulse_problem(cfg.get("problem", {}).get("mu", 0.01))
    variants = cfg.get("variants", ["conservative"])
    bad = [v for v in variants if v not in VARIANTS]
    if bad:
        raise ValueError(f"unknown variants {bad}")
    table = convergence_sweep(problem, cfg["grid"], variants, startup=cfg.get("startup", "exact"))
    fh = _open_out(args.out)
    try:
        table.to_csv(fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0 if all("error" not in r for r in table.rows) else 1


def cmd_compare(args):
    problem = pulse_problem(args.mu)
    fh = _open_out(args.out)
    try:
        _header(fh, args, ["N", "k", "q", "mu", "T", "startup", "quad_refine"])
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dt", "e_m_conservative", "e_m_nonconservative"])
        for dt in args.dts:
            em = []
            for variant in VARIANTS:
                rep, _ = simulate(problem, args.N, args.k, args.q, dt, variant, args.startup,
                                  T=args.T, instant_errors=False, quad_refine=args.quad_refine)
                em.append(rep.e_m)
            w.writerow([repr(dt)] + [repr(v) for v in em])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="nclg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single simulation of the rotating-pulse problem")
    _add_common(p)
    p.add_argument("--variant", choices=VARIANTS, default="conservative")
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="convergence sweep from a JSON grid")
    p.add_argument("config", help="JSON file: {problem, grid, variants}")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="mass error of both variants over several dt")
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--startup", choices=("exact", "rk"), default="exact")
    p.add_argument("--quad-refine", type=int, default=1)
    p.add_argument("--dts", type=float, nargs="+", default=[0.02, 0.01])
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as err:
        print(f"nclg: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
