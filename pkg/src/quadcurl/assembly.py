"""Symmetric interior penalty system on the reconstructed space.

Local blocks are built in each element's monomial basis (vector fields,
component-major) and stored in a block-sparse matrix over all local
coefficients. The global matrix over barycenter unknowns is the
contraction ``T^T M T`` with the reconstruction matrix ``T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analysis import face_points, volume_points
from .errors import NonSPD
from .mesh import Mesh
from .poly import basis_size, cross_normal, curl_powers, monomials
from .reconstruction import ReconstructionOperator

__all__ = [
    "DGSystem",
    "LocalForms",
    "default_eta",
    "local_forms",
    "assemble_matrix",
    "assemble_rhs",
    "assemble",
    "galerkin_consistency_check",
    "face_traces",
    "write_triplets",
    "DEFAULT_SIGN",
]

# Sign of the consistency/symmetrisation face terms. Element-wise
# integration by parts of curl^4 u . v with the outward-normal jumps gives
# +1; the polynomial patch test confirms it.
DEFAULT_SIGN = 1.0


def default_eta(d: int, m: int) -> float:
    return (10.0 if d == 2 else 20.0) * m * m


def basis_curls(mesh: Mesh, m: int, elements, points, orders=(0, 1, 2, 3)) -> dict:
    """curl^k of the local vector basis at physical points.

    ``points`` is (n, q, d) for the elements (n,). Returns
    ``{k: array (n, q, ncomp_k, d*L)}``.
    """
    d = mesh.dim
    L = basis_size(d, m)
    centers = mesh.element_barycenters[elements]
    scales = mesh.element_diameters[elements]
    V = monomials((points - centers[:, None, :]) / scales[:, None, None], m)
    mats = curl_powers(d, m, max(orders))
    out = {}
    for k in orders:
        C, nc = mats[k]
        vals = np.einsum("nql,cla->nqca", V, C.reshape(nc, L, d * L))
        out[k] = vals / scales[:, None, None, None] ** k
    return out


def _cross(values, normals, d):
    """``q x n`` for basis values (F, q, ncomp, nb) and normals (F, q, d)."""
    F, Q, nc, nb = values.shape
    flat = values.reshape(F * Q, nc, nb)
    n = normals.reshape(F * Q, d)
    return cross_normal(flat, n, d).reshape(F, Q, -1, nb)


def face_traces(mesh: Mesh, m: int, faces, exactness: int):
    """Jumps and averages of the local bases on a set of faces.

    For interior faces the basis axis concatenates the plus and minus
    element bases (size 2 d L); for boundary faces only the plus side.
    Returns a dict with ``jump0``, ``jump1``, ``avg2``, ``avg3`` arrays of
    shape (F, q, ncomp, nb), plus ``points``, ``weights`` and ``normals``.
    """
    d = mesh.dim
    faces = np.asarray(faces)
    pts, w = face_points(mesh, faces, exactness)
    n = np.broadcast_to(mesh.face_normals[faces][:, None, :], pts.shape)
    fe = mesh.face_elements[faces]
    interior = fe[:, 1] >= 0
    if faces.size and not (interior.all() or (~interior).all()):
        raise ValueError("face_traces expects all-interior or all-boundary faces")
    plus = basis_curls(mesh, m, fe[:, 0], pts)
    if faces.size and interior[0]:
        minus = basis_curls(mesh, m, fe[:, 1], pts)
        jump0 = np.concatenate([_cross(plus[0], n, d), _cross(minus[0], -n, d)], axis=-1)
        jump1 = np.concatenate([_cross(plus[1], n, d), _cross(minus[1], -n, d)], axis=-1)
        avg2 = 0.5 * np.concatenate([plus[2], minus[2]], axis=-1)
        avg3 = 0.5 * np.concatenate([plus[3], minus[3]], axis=-1)
    else:
        jump0, jump1 = _cross(plus[0], n, d), _cross(plus[1], n, d)
        avg2, avg3 = plus[2], plus[3]
    return dict(jump0=jump0, jump1=jump1, avg2=avg2, avg3=avg3, points=pts, weights=w, normals=n)


@dataclass(frozen=True, eq=False)
class LocalForms:
    """Block-sparse bilinear forms over all local coefficients (N d L)."""

    volume: sp.csr_matrix
    consistency: sp.csr_matrix
    penalty: sp.csr_matrix

    def combine(self, eta: float, sign: float = DEFAULT_SIGN) -> sp.csr_matrix:
        return (self.volume + sign * self.consistency + eta * self.penalty).tocsr()


def _scatter(blocks, row_elems, col_elems, n):
    """COO triplets for element-pair blocks of size n x n."""
    nb = len(blocks)
    r = (row_elems[:, None] * n + np.arange(n))[:, :, None]
    c = (col_elems[:, None] * n + np.arange(n))[:, None, :]
    rows = np.broadcast_to(r, (nb, n, n)).ravel()
    cols = np.broadcast_to(c, (nb, n, n)).ravel()
    return rows, cols, blocks.ravel()


def local_forms(mesh: Mesh, m: int, exactness: int | None = None) -> LocalForms:
    """Volume, consistency and unit-penalty forms in the local bases.

    The penalty form carries the face weights 1/h_e^3 and 1/h_e, so the
    full form is ``volume + sign * consistency + eta * penalty``.
    """
    d = mesh.dim
    n = d * basis_size(d, m)
    size = mesh.n_elements * n
    q = 2 * m if exactness is None else exactness
    ids = np.arange(mesh.n_elements)

    pts, w = volume_points(mesh, q)
    vals = basis_curls(mesh, m, ids, pts, orders=(0, 2))
    vol = np.einsum("nq,nqca,nqcb->nab", w, vals[0], vals[0])
    vol += np.einsum("nq,nqca,nqcb->nab", w, vals[2], vals[2])
    r, c, v = _scatter(vol, ids, ids, n)
    volume = sp.csr_matrix((v, (r, c)), shape=(size, size))

    trip_c, trip_p = [], []
    he = mesh.face_diameters
    fe = mesh.face_elements
    for faces in (mesh.interior_faces, mesh.boundary_faces):
        if len(faces) == 0:
            continue
        tr = face_traces(mesh, m, faces, q)
        fw = tr["weights"]
        cons = np.einsum("fq,fqca,fqcb->fab", fw, tr["jump0"], tr["avg3"])
        cons += np.einsum("fq,fqca,fqcb->fab", fw, tr["jump1"], tr["avg2"])
        cons += cons.transpose(0, 2, 1)
        h = he[faces][:, None]
        pen = np.einsum("fq,fqca,fqcb->fab", fw / h**3, tr["jump0"], tr["jump0"])
        pen += np.einsum("fq,fqca,fqcb->fab", fw / h, tr["jump1"], tr["jump1"])
        sides = [fe[faces, 0]] + ([fe[faces, 1]] if fe[faces[0], 1] >= 0 else [])
        for i, ei in enumerate(sides):
            for j, ej in enumerate(sides):
                sl_i, sl_j = slice(i * n, (i + 1) * n), slice(j * n, (j + 1) * n)
                trip_c.append(_scatter(np.ascontiguousarray(cons[:, sl_i, sl_j]), ei, ej, n))
                trip_p.append(_scatter(np.ascontiguousarray(pen[:, sl_i, sl_j]), ei, ej, n))

    def build(trips):
        rows = np.concatenate([t[0] for t in trips])
        cols = np.concatenate([t[1] for t in trips])
        data = np.concatenate([t[2] for t in trips])
        return sp.csr_matrix((data, (rows, cols)), shape=(size, size))

    return LocalForms(volume, build(trip_c), build(trip_p))


@dataclass(frozen=True, eq=False)
class DGSystem:
    """``A x = b`` over d * n_elements unknowns (element-major, component-minor)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray | None
    eta: float
    sign: float
    operator: ReconstructionOperator = field(repr=False)
    forms: LocalForms = field(repr=False)
    base: sp.csr_matrix = field(repr=False)
    penalty: sp.csr_matrix = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    def with_rhs(self, rhs) -> "DGSystem":
        return DGSystem(self.matrix, np.asarray(rhs), self.eta, self.sign,
                        self.operator, self.forms, self.base, self.penalty)

    def mu(self):
        """Per-face penalties (mu1, mu2) = (eta/h_e^3, eta/h_e)."""
        he = self.operator.mesh.face_diameters
        return self.eta / he**3, self.eta / he

    def symmetry_error(self) -> float:
        A = self.matrix
        amax = abs(A).max()
        return float(abs(A - A.T).max() / amax) if amax else 0.0

    def check_spd(self) -> bool:
        """True if the matrix is positive definite.

        Small systems use a dense Cholesky factorisation. Larger ones use a
        sparse LU with a symmetric fill-reducing ordering and diagonal
        pivots only: without row exchanges a symmetric matrix is positive
        definite exactly when every pivot is positive. If SuperLU had to
        pivot off the diagonal the dense test is used instead.
        """
        A = self.matrix
        if A.shape[0] <= SPD_DENSE_LIMIT:
            return _dense_cholesky_ok(A)
        try:
            lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError:  # exactly singular
            return False
        if not np.array_equal(lu.perm_r, lu.perm_c):
            return _dense_cholesky_ok(A)
        return bool(np.all(lu.U.diagonal() > 0))


SPD_DENSE_LIMIT = 3000


def _dense_cholesky_ok(A) -> bool:
    try:
        np.linalg.cholesky(A.toarray())
    except np.linalg.LinAlgError:
        return False
    return True


def _contract(T: sp.csr_matrix, M: sp.csr_matrix) -> sp.csr_matrix:
    A = (T.T @ (M @ T)).tocsr()
    A = 0.5 * (A + A.T)
    A.sort_indices()
    return A.tocsr()


def assemble_matrix(operator: ReconstructionOperator, eta: float | None = None,
                    sign: float = DEFAULT_SIGN, forms: LocalForms | None = None) -> DGSystem:
    """Global matrix of the bilinear form; ``rhs`` is left empty."""
    mesh, m = operator.mesh, operator.degree
    if m < 2:
        raise ValueError("the discrete problem needs m >= 2")
    eta = default_eta(mesh.dim, m) if eta is None else float(eta)
    forms = local_forms(mesh, m) if forms is None else forms
    T = operator.matrix
    base = _contract(T, (forms.volume + sign * forms.consistency).tocsr())
    penalty = _contract(T, forms.penalty)
    A = (base + eta * penalty).tocsr()
    return DGSystem(A, None, eta, sign, operator, forms, base, penalty)


def local_rhs(mesh: Mesh, m: int, f, g1, g2, eta: float, sign: float = DEFAULT_SIGN,
              exactness: int | None = None) -> np.ndarray:
    """Linear form tested against every local basis function, shape (N d L,)."""
    d = mesh.dim
    n = d * basis_size(d, m)
    q = 2 * m + 4 if exactness is None else exactness
    ids = np.arange(mesh.n_elements)
    out = np.zeros((mesh.n_elements, n))

    pts, w = volume_points(mesh, q)
    fv = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(pts.shape[:2] + (d,))
    phi = basis_curls(mesh, m, ids, pts, orders=(0,))[0]
    out += np.einsum("nq,nqc,nqca->na", w, fv, phi)

    faces = mesh.boundary_faces
    if len(faces):
        tr = face_traces(mesh, m, faces, q)
        fpts, fw, nrm = tr["points"], tr["weights"], tr["normals"]
        flat_x, flat_n = fpts.reshape(-1, d), nrm.reshape(-1, d)
        g1v = _trace_data(g1, flat_x, flat_n, d, 0).reshape(fpts.shape[:2] + (-1,))
        g2v = _trace_data(g2, flat_x, flat_n, d, 1).reshape(fpts.shape[:2] + (-1,))
        he = mesh.face_diameters[faces][:, None]
        mu1, mu2 = eta / he**3, eta / he
        contrib = np.einsum("fq,fqc,fqca->fa", fw, g1v, sign * tr["avg3"])
        contrib += np.einsum("fq,fqc,fqca->fa", fw * mu1, g1v, tr["jump0"])
        contrib += np.einsum("fq,fqc,fqca->fa", fw, g2v, sign * tr["avg2"])
        contrib += np.einsum("fq,fqc,fqca->fa", fw * mu2, g2v, tr["jump1"])
        np.add.at(out, mesh.face_elements[faces, 0], contrib)
    return out.ravel()


def _trace_data(g, x, normals, d, order):
    """Evaluate boundary data; 2D curl traces may be given as the scalar curl u."""
    if g is None:
        nc = (1 if order == 0 else 2) if d == 2 else 3
        return np.zeros((len(x), nc))
    vals = np.asarray(g(x, normals), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if d == 2 and order == 1 and vals.shape[1] == 1:
        vals = cross_normal(vals, normals, 2)
    return vals


def assemble_rhs(operator: ReconstructionOperator, f, g1=None, g2=None, eta: float | None = None,
                 sign: float = DEFAULT_SIGN, exactness: int | None = None) -> np.ndarray:
    """Load vector over barycenter unknowns."""
    mesh, m = operator.mesh, operator.degree
    eta = default_eta(mesh.dim, m) if eta is None else float(eta)
    b = local_rhs(mesh, m, f, g1, g2, eta, sign, exactness)
    return operator.matrix.T @ b


def assemble(operator: ReconstructionOperator, problem, eta: float | None = None,
             sign: float = DEFAULT_SIGN) -> DGSystem:
    """Matrix and load vector for a manufactured problem."""
    system = assemble_matrix(operator, eta, sign)
    b = assemble_rhs(operator, problem.f, problem.g1, problem.g2, system.eta, sign)
    return system.with_rhs(b)


def local_projection(mesh: Mesh, m: int, fun, exactness: int | None = None) -> np.ndarray:
    """Per-element L2 projection of ``fun`` onto local vector polynomials.

    Exact for polynomial fields of degree <= m; returns (N d L,).
    """
    d = mesh.dim
    q = 2 * m + 2 if exactness is None else exactness
    pts, w = volume_points(mesh, q)
    ids = np.arange(mesh.n_elements)
    V = monomials((pts - mesh.element_barycenters[:, None, :]) / mesh.element_diameters[:, None, None], m)
    M = np.einsum("nq,nqa,nqb->nab", w, V, V)
    vals = np.asarray(fun(pts.reshape(-1, d)), dtype=float).reshape(pts.shape[:2] + (d,))
    rhs = np.einsum("nq,nqa,nqc->nca", w, V, vals)
    coeffs = np.linalg.solve(M[:, None], rhs[..., None])[..., 0]
    return coeffs[ids].reshape(-1)


def galerkin_consistency_check(operator: ReconstructionOperator, exact, eta: float | None = None,
                               sign: float = DEFAULT_SIGN, relative: bool = True) -> float:
    """max_i |B_h(u*, lambda_i) - l_h(lambda_i)| for manufactured data from ``exact``.

    ``exact`` must be a polynomial field of degree <= m (with ``curl``,
    ``f``, ``g1``, ``g2``). u* enters through its exact local expansion, not
    through the reconstruction. With ``relative`` the residual is divided
    by max|l_h(lambda_i)| (or 1 when the load vanishes).
    """
    mesh, m = operator.mesh, operator.degree
    eta = default_eta(mesh.dim, m) if eta is None else float(eta)
    forms = local_forms(mesh, m)
    c_star = local_projection(mesh, m, exact)
    M = forms.combine(eta, sign)
    T = operator.matrix
    lhs = T.T @ (M @ c_star)
    b = assemble_rhs(operator, exact.f, exact.g1, exact.g2, eta, sign)
    res = float(np.max(np.abs(lhs - b))) if len(b) else 0.0
    if relative:
        scale = float(np.max(np.abs(b))) if len(b) else 0.0
        res /= scale if scale > 0 else 1.0
    return res


def write_triplets(matrix, path) -> None:
    """Coordinate text export: ``rows cols nnz`` then ``i j value`` (0-based)."""
    A = sp.coo_matrix(matrix)
    order = np.lexsort((A.col, A.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{i} {j} {float(v)!r}\n")


def check_positive_definite(system: DGSystem) -> None:
    if not system.check_spd():
        raise NonSPD(f"matrix is not positive definite at eta={system.eta}")
