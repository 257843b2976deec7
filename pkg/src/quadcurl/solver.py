"""Solvers for the symmetric positive definite penalty system."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, NonSPD

__all__ = ["SolveReport", "solve", "conjugate_gradient", "block_jacobi", "DIRECT_LIMIT"]

log = logging.getLogger(__name__)

DIRECT_LIMIT = 2000


@dataclass
class SolveReport:
    x: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    method: str
    history: list = field(default_factory=list, repr=False)


def block_jacobi(A: sp.spmatrix, block: int):
    """Inverse of the block diagonal of A as a callable, blocks of size ``block``."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if n % block:
        raise ValueError(f"size {n} not divisible by block size {block}")
    nb = n // block
    D = np.zeros((nb, block, block))
    coo = A.tocoo()
    mask = coo.row // block == coo.col // block
    np.add.at(D, (coo.row[mask] // block, coo.row[mask] % block, coo.col[mask] % block), coo.data[mask])
    try:
        Dinv = np.linalg.inv(D)
    except np.linalg.LinAlgError as exc:
        raise NonSPD("singular diagonal block") from exc

    def apply(r):
        return np.einsum("kij,kj->ki", Dinv, r.reshape(nb, block)).ravel()

    return apply


def conjugate_gradient(A, b, precond=None, x0=None, tol: float = 1e-10, max_iter: int | None = None,
                       callback=None):
    """Preconditioned CG, stopping on ||b - A x|| <= tol ||b||.

    Returns ``(x, iterations, relative_residual, history)`` where history
    holds the preconditioned residual norms sqrt(r^T z). ``callback(x)``
    is called after every iteration.
    """
    n = len(b)
    max_iter = 10 * n if max_iter is None else max_iter
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0, []
    r = b - A @ x
    z = precond(r) if precond else r
    p = z.copy()
    rz = float(r @ z)
    history = [np.sqrt(max(rz, 0.0))]
    rel = np.linalg.norm(r) / bnorm
    it = 0
    while rel > tol:
        if it >= max_iter:
            raise NoConvergence(it, rel)
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise NonSPD(f"CG breakdown: p^T A p = {pAp:.3e} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = precond(r) if precond else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        if callback is not None:
            callback(x)
        history.append(np.sqrt(max(rz, 0.0)))
        rel = np.linalg.norm(r) / bnorm
        if it % 1000 == 0:
            # recompute the true residual to stop drift
            r = b - A @ x
            rel = np.linalg.norm(r) / bnorm
    return x, it, float(rel), history


def solve(system, tol: float = 1e-10, max_iter: int | None = None, method: str = "auto",
          block: int | None = None) -> SolveReport:
    """Solve ``system.matrix x = system.rhs``.

    ``method`` is ``direct`` (dense Cholesky), ``sparse`` (sparse LU with
    iterative refinement), ``cg`` (block-Jacobi PCG) or ``auto`` (dense
    below DIRECT_LIMIT unknowns, sparse above). Block-Jacobi CG stalls
    near 1e-9 on the finest quad-curl systems, hence the sparse default.
    ``system`` may be a DGSystem or a ``(matrix, rhs)`` pair.
    """
    if isinstance(system, tuple):
        A, b = system
    else:
        A, b = system.matrix, system.rhs
        if block is None:
            block = system.operator.dim
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    n = len(b)
    if method == "auto":
        method = "direct" if n < DIRECT_LIMIT else "sparse"
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return SolveReport(np.zeros(n), 0.0, 0, method)

    if method == "direct":
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        try:
            c = sla.cho_factor(dense)
        except np.linalg.LinAlgError as exc:
            raise NonSPD("Cholesky factorisation failed; increase the penalty") from exc
        x = sla.cho_solve(c, b)
        res = float(np.linalg.norm(b - A @ x) / bnorm)
        return SolveReport(x, res, 0, "direct")

    if method == "sparse":
        A = sp.csc_matrix(A)
        lu = spla.splu(A)
        if np.any(lu.U.diagonal() == 0):
            raise NonSPD("singular matrix")
        x = lu.solve(b)
        history = []
        for it in range(max_iter or 5):
            r = b - A @ x
            res = float(np.linalg.norm(r) / bnorm)
            history.append(res)
            if res <= tol:
                break
            x += lu.solve(r)
        else:
            res = float(np.linalg.norm(b - A @ x) / bnorm)
        if res > tol:
            raise NoConvergence(len(history), res)
        return SolveReport(x, res, len(history) - 1, "sparse", history)

    if method == "cg":
        A = sp.csr_matrix(A)
        pre = block_jacobi(A, block or 1)
        x, it, res, hist = conjugate_gradient(A, b, pre, tol=tol, max_iter=max_iter)
        log.info("cg converged in %d iterations (residual %.2e)", it, res)
        return SolveReport(x, res, it, "cg", hist)
    raise ValueError(f"unknown method {method!r}")
