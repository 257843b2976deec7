"""Convergence and stability studies built from the library pieces.

A run walks a list of structured mesh sizes. For each size it builds the
mesh, the reconstruction, the penalty system, solves it and measures
errors; failures are re-raised as :class:`StageError` naming the stage.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import CSV_COLUMNS, ErrorRecord, SolutionField, error_L2, error_energy, observed_rates
from .assembly import assemble, default_eta
from .errors import StageError
from .mesh import Mesh, build_unit_cube_mesh, build_unit_square_mesh
from .poly import basis_size
from .problems import get_problem
from .reconstruction import (
    DEFAULT_PATCH_SIZE,
    build_patches,
    build_reconstruction,
    compute_lambda,
    default_patch_size,
    interpolate_smooth,
)
from .solver import solve

__all__ = [
    "EXAMPLE_DIMS",
    "DEFAULT_LEVELS",
    "RunConfig",
    "RunResult",
    "LambdaRow",
    "build_mesh",
    "run_single",
    "run_example",
    "run_interpolation",
    "run_lambda_study",
    "write_csv",
    "rate_table",
    "lambda_csv",
]

log = logging.getLogger(__name__)

EXAMPLE_DIMS = {"poly2d": 2, "ex1": 2, "poly3d": 3, "ex2": 3}

DEFAULT_LEVELS = {
    "ex1": (8, 16, 32, 64),
    "ex2": (2, 4, 8),
    "poly2d": (4,),
    "poly3d": (2,),
}


@dataclass(frozen=True)
class RunConfig:
    """Settings for one study.

    ``eta`` and ``patch_size`` default to the dimension/degree tables.
    (d, m) pairs outside the patch-size table are rejected unless
    ``patch_size`` is given explicitly.
    """

    example: str
    m: int
    levels: tuple = ()
    eta: float | None = None
    patch_size: int | None = None
    tol: float = 1e-10
    method: str = "auto"
    seed: int = 0
    timings: bool = False

    def __post_init__(self):
        if self.example not in EXAMPLE_DIMS:
            raise ValueError(f"unknown example {self.example!r}; choose from {sorted(EXAMPLE_DIMS)}")
        if self.m < 2:
            raise ValueError(f"order m={self.m} unsupported; the method needs m >= 2")
        if self.patch_size is None and (self.dim, self.m) not in DEFAULT_PATCH_SIZE:
            raise ValueError(
                f"no tabulated patch size for d={self.dim}, m={self.m}; pass --patch-size explicitly"
            )
        levels = tuple(int(n) for n in (self.levels or DEFAULT_LEVELS[self.example]))
        if any(n < 1 for n in levels):
            raise ValueError(f"mesh sizes must be positive, got {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def dim(self) -> int:
        return EXAMPLE_DIMS[self.example]

    @property
    def resolved_eta(self) -> float:
        return default_eta(self.dim, self.m) if self.eta is None else float(self.eta)

    @property
    def resolved_patch_size(self) -> int:
        return default_patch_size(self.dim, self.m) if self.patch_size is None else int(self.patch_size)


@dataclass
class RunResult:
    records: list
    solutions: list = field(default_factory=list, repr=False)


def build_mesh(dim: int, n: int) -> Mesh:
    return build_unit_square_mesh(n) if dim == 2 else build_unit_cube_mesh(n)


class _Stage:
    """Context manager that tags exceptions with the running stage."""

    def __init__(self, name, n):
        self.name, self.n = name, n

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, (StageError, KeyboardInterrupt)):
            raise StageError(self.name, self.n, exc) from exc
        return False


def run_single(config: RunConfig, n: int, problem=None, inspect=None) -> tuple:
    """One mesh level; returns ``(ErrorRecord, SolutionField, SolveReport)``.

    ``inspect(n, system)`` is called with the assembled system before the
    solve, e.g. to check matrix properties.
    """
    problem = get_problem(config.example, config.m, config.seed) if problem is None else problem
    d, m = config.dim, config.m
    start = time.perf_counter()
    with _Stage("mesh", n):
        mesh = build_mesh(d, n)
    with _Stage("reconstruction", n):
        op = build_reconstruction(mesh, m, config.resolved_patch_size)
        lam = compute_lambda(mesh, op.patches, m).lambda_m
    with _Stage("assembly", n):
        system = assemble(op, problem, config.resolved_eta)
    if inspect is not None:
        inspect(n, system)
    with _Stage("solve", n):
        report = solve(system, tol=config.tol, method=config.method)
    with _Stage("errors", n):
        u_h = op.apply(report.x)
        e_l2 = error_L2(u_h, problem)
        e_en = error_energy(u_h, problem)
    wall = (time.perf_counter() - start) * 1e3
    rec = ErrorRecord(
        m=m,
        d=d,
        h=float(mesh.h),
        n_elem=mesh.n_elements,
        dofs=op.n_dofs,
        eta=config.resolved_eta,
        patch_S=config.resolved_patch_size,
        err_l2=e_l2,
        err_energy=e_en,
        lambda_m=lam,
        solve_iters=report.iterations,
        wall_ms=wall,
    )
    log.info("n=%d: L2 %.3e energy %.3e (%.0f ms)", n, e_l2, e_en, wall)
    return rec, u_h, report


def run_example(config: RunConfig, out=None, keep_solutions: bool = False, inspect=None) -> RunResult:
    """All levels of a study, with pairwise observed rates.

    ``out`` may be a path or text stream; the CSV is written after the
    last level. ``inspect`` is passed on to :func:`run_single`.
    """
    problem = get_problem(config.example, config.m, config.seed)
    records, solutions = [], []
    for n in config.levels:
        rec, u_h, _ = run_single(config, n, problem, inspect)
        records.append(rec)
        if keep_solutions:
            solutions.append(u_h)
    records = observed_rates(records)
    if out is not None:
        write_csv(records, out, timings=config.timings)
    return RunResult(records, solutions)


def run_interpolation(config: RunConfig) -> list:
    """Energy error of the reconstructed interpolant per level as (h, error)."""
    problem = get_problem(config.example, config.m, config.seed)
    out = []
    for n in config.levels:
        mesh = build_mesh(config.dim, n)
        with _Stage("reconstruction", n):
            op = build_reconstruction(mesh, config.m, config.resolved_patch_size)
        with _Stage("errors", n):
            u_i: SolutionField = interpolate_smooth(op, problem)
            out.append((float(mesh.h), error_energy(u_i, problem)))
    return out


def write_csv(records, out, timings: bool = False) -> str:
    """Write records with the columns of :data:`CSV_COLUMNS`.

    Wall-clock times are left blank unless ``timings`` is set, so that
    repeated runs give identical files.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    wall = CSV_COLUMNS.index("wall_ms")
    for rec in records:
        row = rec.csv_row()
        if not timings:
            row[wall] = ""
        w.writerow(row)
    text = buf.getvalue()
    if hasattr(out, "write"):
        out.write(text)
    elif out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _fmt_rate(r):
    return "   -" if r is None or not np.isfinite(r) else f"{r:5.2f}"


def rate_table(records) -> str:
    """Human-readable error/rate table."""
    lines = [f"{'h':>10} {'dofs':>8} {'L2 error':>11} {'rate':>5} {'energy':>11} {'rate':>5} {'Lambda':>7}"]
    for r in records:
        lines.append(
            f"{r.h:10.4e} {r.dofs:8d} {r.err_l2:11.4e} {_fmt_rate(r.rate_l2)} "
            f"{r.err_energy:11.4e} {_fmt_rate(r.rate_energy)} {r.lambda_m:7.3f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------- stability


LAMBDA_COLUMNS = ("d", "m", "n", "h", "patch_S", "lambda_m", "n_deficient", "below_bound")


@dataclass(frozen=True)
class LambdaRow:
    d: int
    m: int
    n: int
    h: float
    patch_S: int
    lambda_m: float
    n_deficient: int

    @property
    def below_bound(self) -> bool:
        """The threshold #S is smaller than dim P_m, so unisolvence is not guaranteed."""
        return self.patch_S < basis_size(self.d, self.m)

    @property
    def deficient(self) -> bool:
        return self.n_deficient > 0 or self.below_bound


def run_lambda_study(d: int, m: int, sizes, patch_sizes, out=None) -> list:
    """Lambda_m for every (mesh size, #S) pair.

    Deficient patches are reported in the row, not raised. Patches keep
    whole vertex rings, so a threshold below dim P_m can still give
    unisolvent patches; such rows carry ``below_bound`` instead.
    """
    rows = []
    for n in sizes:
        mesh = build_mesh(d, int(n))
        for s in patch_sizes:
            with _Stage("reconstruction", n):
                patches = build_patches(mesh, int(s))
                rep = compute_lambda(mesh, patches, m)
            rows.append(LambdaRow(d, m, int(n), float(mesh.h), int(s), rep.lambda_m, rep.n_deficient))
    if out is not None:
        lambda_csv(rows, out)
    return rows


def lambda_csv(rows, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LAMBDA_COLUMNS)
    for r in rows:
        lam = "inf" if not np.isfinite(r.lambda_m) else f"{r.lambda_m:.10e}"
        w.writerow([r.d, r.m, r.n, f"{r.h:.10e}", r.patch_S, lam, r.n_deficient, int(r.below_bound)])
    text = buf.getvalue()
    if hasattr(out, "write"):
        out.write(text)
    elif out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text

