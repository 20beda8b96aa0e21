"""Command-line driver: convergence sweeps, complex audits and interpolation studies."""

import argparse
import csv
import sys
from pathlib import Path

from . import bench
from .complexcheck import check_exactness
from .errors import ContractViolation
from .mesh import unit_cube_mesh

CSV_HEADER = ["h", "dofs", *bench.ERROR_COLUMNS, *(f"eoc_{c[4:]}" for c in bench.ERROR_COLUMNS)]

_PROBLEMS = {
    "quadcurl": ("mu", "gamma", "err_triple"),
    "brinkman": ("nu", "alpha", "err_triple"),
}


def _fmt(x):
    return "" if x is None else repr(float(x))


def table_rows(records):
    """Rows of the convergence CSV, EOC columns blank on the coarsest level."""
    orders = {c: [None] + bench.eoc([getattr(r, c) for r in records]) for c in bench.ERROR_COLUMNS}
    rows = []
    for k, rec in enumerate(records):
        row = [_fmt(rec.h), str(rec.dofs)]
        row += [_fmt(getattr(rec, c)) for c in bench.ERROR_COLUMNS]
        row += [_fmt(orders[c][k]) for c in bench.ERROR_COLUMNS]
        rows.append(row)
    return rows


def write_csv(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(table_rows(records))
    return path


def _summary(problem, pname, value, records, out):
    print(f"{problem}  {pname}={value:g}  -> {out}")
    print(f"{'h':>8} {'dofs':>7} {'err_l2':>10} {'err_triple':>11} {'eoc':>6} {'err_p':>10} {'eoc_p':>6}"
          f" {'|p_h|':>9} {'|div u_h|':>9}")
    tri = [None] + bench.eoc([r.err_triple for r in records])
    pre = [None] + bench.eoc([r.err_p for r in records])
    for rec, a, b in zip(records, tri, pre):
        ea = "" if a is None else f"{a:.2f}"
        eb = "" if b is None else f"{b:.2f}"
        print(f"{rec.h:8.4f} {rec.dofs:7d} {rec.err_l2:10.3e} {rec.err_triple:11.3e} {ea:>6} "
              f"{rec.err_p:10.3e} {eb:>6} {rec.extras['ph_norm']:9.1e} {rec.extras['div_uh_norm']:9.1e}")
    print()


def cmd_solve(args):
    pname, cname, _ = _PROBLEMS[args.command]
    values = getattr(args, pname) or [1.0]
    coef = getattr(args, cname)
    outdir = Path(args.out)
    for value in values:
        config = bench.RunConfig(args.command, args.order, args.levels, value, coef, args.tol,
                                 args.solver)
        records = bench.run(config)
        path = write_csv(outdir / f"{args.command}_r{args.order}_{pname}{value:g}.csv", records)
        _summary(args.command, pname, value, records, path)
    return 0


def cmd_audit(args):
    mesh = unit_cube_mesh(*args.divisions)
    bcs = ("none", "homogeneous") if args.bc == "both" else (args.bc,)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ok = True
    for bc in bcs:
        report = check_exactness(mesh, args.order, bc)
        print(report.to_text())
        print()
        tag = "x".join(str(n) for n in args.divisions)
        report.to_csv(outdir / f"audit_{tag}_r{args.order}_{bc}.csv")
        ok &= report.passed
    return 0 if ok else 1


def cmd_interp(args):
    cases = (("Splus1", bench.example_quadcurl()), ("Splus2", bench.example_brinkman()))
    divisions = [2**k for k in range(1, args.levels + 1)]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for family, exact in cases:
        rows = bench.interpolation_errors(family, args.order, exact, divisions)
        orders = [None] + bench.eoc([e for _, e in rows])
        path = outdir / f"interp_{family}_r{args.order}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["h", "err_l2", "eoc_l2"])
            for (h, e), o in zip(rows, orders):
                w.writerow([_fmt(h), _fmt(e), _fmt(o)])
        print(f"{family} r={args.order} -> {path}")
        for (h, e), o in zip(rows, orders):
            print(f"  h={h:.4f}  err_l2={e:.3e}  eoc={'' if o is None else f'{o:.2f}'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ncfem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="results"):
        p.add_argument("--order", type=int, choices=(2, 3), default=2)
        p.add_argument("--out", default=out_default, help="output directory")

    for name, (pname, cname, _) in _PROBLEMS.items():
        p = sub.add_parser(name, help=f"convergence sweep for the {name} scheme")
        common(p)
        p.add_argument("--levels", type=int, default=3, help="meshes with h = 1/2 ... 1/2^levels")
        p.add_argument(f"--{pname}", type=float, action="append",
                       help="repeat to sweep several values (default 1)")
        p.add_argument(f"--{cname}", type=float, default=1.0)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--solver", choices=("direct", "minres"), default="direct")
        p.set_defaults(func=cmd_solve)

    p = sub.add_parser("audit", help="rank audit of the discrete complex")
    common(p)
    p.add_argument("--divisions", type=int, nargs=3, default=(2, 2, 2), metavar=("N1", "N2", "N3"))
    p.add_argument("--bc", choices=("none", "homogeneous", "both"), default="both")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("interp", help="interpolation-only convergence study")
    common(p)
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_interp)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
