"""Command-line entry point: ``quadcurl <command> ...``.

Commands
--------
solve        one mesh level of an example
convergence  a sequence of levels with observed rates
lambda       stability constant for a list of patch sizes
mesh-info    summary of a Gmsh file

``RDA_THREADS`` caps the BLAS/OpenMP thread pools; it must be applied
before numpy is imported, so heavy imports happen inside the handlers.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

# Tolerances applied by ``convergence --assert-rates``.
RATE_TOL = {2: 0.25, 3: 0.35}
PATCH_TEST_TOL = 1e-8


def apply_thread_cap(environ=os.environ) -> int | None:
    raw = environ.get("RDA_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"RDA_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise SystemExit(f"RDA_THREADS must be a positive integer, got {raw!r}")
    for var in THREAD_VARS:
        environ[var] = str(n)
    return n


def _int_list(text: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadcurl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one example on one mesh")
    s.add_argument("--example", required=True, choices=["poly2d", "poly3d", "ex1", "ex2"])
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--n", type=int, required=True, help="subdivisions per side")
    s.add_argument("--eta", type=float)
    s.add_argument("--patch-size", type=int)
    s.add_argument("--out", help="CSV output path")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--method", default="auto", choices=["auto", "direct", "sparse", "cg"])
    s.add_argument("--timings", action="store_true", help="write wall-clock times into the CSV")

    c = sub.add_parser("convergence", help="run a mesh sequence and report rates")
    c.add_argument("--example", required=True, choices=["poly2d", "poly3d", "ex1", "ex2"])
    c.add_argument("--order", type=int, required=True)
    c.add_argument("--levels", type=_int_list, help="e.g. 8,16,32")
    c.add_argument("--eta", type=float)
    c.add_argument("--patch-size", type=int)
    c.add_argument("--out", help="CSV output path (default: stdout)")
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--method", default="auto", choices=["auto", "direct", "sparse", "cg"])
    c.add_argument("--timings", action="store_true")
    c.add_argument("--assert-rates", action="store_true", help="exit 1 if the finest-pair rates miss tolerance")

    lam = sub.add_parser("lambda", help="stability constant versus patch size")
    lam.add_argument("--dim", type=int, required=True, choices=[2, 3])
    lam.add_argument("--order", type=int, required=True)
    lam.add_argument("--n", type=_int_list, required=True, help="mesh size(s), comma separated")
    lam.add_argument("--patch-sizes", type=_int_list, required=True)
    lam.add_argument("--out", help="CSV output path (default: stdout)")

    mi = sub.add_parser("mesh-info", help="summarise a Gmsh MSH file")
    mi.add_argument("--mesh", required=True)
    return p


def _config(args, levels):
    from .harness import RunConfig

    return RunConfig(
        example=args.example,
        m=args.order,
        levels=tuple(levels),
        eta=args.eta,
        patch_size=args.patch_size,
        tol=args.tol,
        method=args.method,
        timings=args.timings,
    )


def cmd_solve(args) -> int:
    from .harness import rate_table, run_example

    res = run_example(_config(args, [args.n]), out=args.out)
    print(rate_table(res.records))
    return 0


def check_rates(records, example: str, m: int) -> list:
    """Pass/fail messages for the finest pair of a study.

    Patch tests check the error itself. Both examples check the energy rate
    against m-1; the L2 rate bound is checked for the 2D example only.
    """
    msgs = []
    last = records[-1]
    if example.startswith("poly"):
        ok = last.err_l2 <= PATCH_TEST_TOL
        msgs.append((ok, f"patch test L2 error {last.err_l2:.3e} <= {PATCH_TEST_TOL:g}"))
        return msgs
    if len(records) < 2:
        return [(False, "rates need at least two levels")]
    tol = RATE_TOL[last.d]
    target = m - 1
    ok = abs(last.rate_energy - target) <= tol
    msgs.append((ok, f"energy rate {last.rate_energy:.3f} within {target} +/- {tol}"))
    if last.d == 2:
        ok = last.rate_l2 >= target - tol
        msgs.append((ok, f"L2 rate {last.rate_l2:.3f} >= {target - tol:g}"))
    return msgs


def cmd_convergence(args) -> int:
    from .harness import rate_table, run_example

    config = _config(args, args.levels or ())
    res = run_example(config, out=args.out if args.out else sys.stdout)
    print(rate_table(res.records), file=sys.stderr if not args.out else sys.stdout)
    if not args.assert_rates:
        return 0
    status = 0
    for ok, msg in check_rates(res.records, config.example, config.m):
        print(f"{'PASS' if ok else 'FAIL'}: {msg}", file=sys.stderr)
        status |= 0 if ok else 1
    return status


def cmd_lambda(args) -> int:
    from .harness import lambda_csv, run_lambda_study

    rows = run_lambda_study(args.dim, args.order, args.n, args.patch_sizes)
    text = lambda_csv(rows, args.out)
    if not args.out:
        sys.stdout.write(text)
    for r in rows:
        if r.n_deficient:
            print(f"warning: n={r.n} #S={r.patch_S}: {r.n_deficient} deficient patches", file=sys.stderr)
        elif r.below_bound:
            print(f"warning: #S={r.patch_S} is below dim P_{r.m}; unisolvence not guaranteed", file=sys.stderr)
    return 0


def cmd_mesh_info(args) -> int:
    from .mesh import load_gmsh

    mesh = load_gmsh(args.mesh)
    for key, val in mesh.summary().items():
        print(f"{key}: {val}")
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "lambda": cmd_lambda,
    "mesh-info": cmd_mesh_info,
}


def main(argv=None) -> int:
    apply_thread_cap()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .errors import QuadCurlError

    try:
        return COMMANDS[args.command](args)
    except (QuadCurlError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
