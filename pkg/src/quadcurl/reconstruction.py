"""Patch reconstruction from one value per element and component.

For every element K a patch S(K) is grown by vertex-neighbour rings until
it holds at least ``patch_size`` elements. A degree-m polynomial is then
fitted by least squares to the values at the patch barycenters while
matching the value at the barycenter of K exactly. The fit is linear in
the data, so it is stored as a weight matrix per element and shared by
all vector components.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .analysis import SolutionField, volume_points
from .errors import DeficientPatch
from .mesh import Mesh
from .poly import basis_size, monomials

__all__ = [
    "DEFAULT_PATCH_SIZE",
    "ElementPatch",
    "Unisolvence",
    "ReconstructionOperator",
    "LambdaReport",
    "build_patch",
    "build_patches",
    "check_unisolvence",
    "fit_weights",
    "build_reconstruction",
    "reconstruct",
    "interpolate_smooth",
    "compute_lambda",
    "default_patch_size",
]

# (d, m) -> threshold #S used in the numerical examples
DEFAULT_PATCH_SIZE = {
    (2, 2): 12, (2, 3): 20, (2, 4): 27,
    (3, 2): 25, (3, 3): 47,
}

UNISOLVENCE_TOL = 1e-10


def default_patch_size(d: int, m: int) -> int:
    try:
        return DEFAULT_PATCH_SIZE[(d, m)]
    except KeyError:
        raise ValueError(f"no default patch size for d={d}, m={m}; pass one explicitly") from None


@dataclass(frozen=True)
class ElementPatch:
    element: int
    members: np.ndarray
    points: np.ndarray = field(repr=False)
    center: np.ndarray = field(repr=False)
    diameter: float = 0.0

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def local_index(self) -> int:
        """Position of the centre element within ``members``."""
        return int(np.searchsorted(self.members, self.element))


def build_patch(mesh: Mesh, element: int, patch_size: int) -> ElementPatch:
    if patch_size < 1:
        raise ValueError("patch_size must be >= 1")
    neighbours = mesh.vertex_neighbours
    members = np.array([element])
    while len(members) < patch_size:
        grown = np.unique(np.concatenate([neighbours[k] for k in members]))
        if len(grown) == len(members):
            break  # patch already covers its connected component
        members = grown
    pts = mesh.element_barycenters[members]
    center = mesh.element_barycenters[element]
    coords = mesh.vertices[mesh.elements[members]].reshape(-1, mesh.dim)
    radius = float(np.max(np.linalg.norm(coords - center, axis=1)))
    return ElementPatch(int(element), members, pts, center, 2.0 * radius)


def build_patches(mesh: Mesh, patch_size: int) -> list:
    return [build_patch(mesh, k, patch_size) for k in range(mesh.n_elements)]


@dataclass(frozen=True)
class Unisolvence:
    ok: bool
    rank: int
    needed: int

    def __bool__(self):
        return self.ok


def _vandermonde(patch: ElementPatch, m: int, scale: float) -> np.ndarray:
    return monomials((patch.points - patch.center) / scale, m)


def _check_rank(V: np.ndarray) -> Unisolvence:
    needed = V.shape[1]
    if V.shape[0] < needed:
        s = np.linalg.svd(V, compute_uv=False)
        rank = int(np.sum(s > UNISOLVENCE_TOL * s[0])) if s.size else 0
        return Unisolvence(False, rank, needed)
    s = np.linalg.svd(V, compute_uv=False)
    rank = int(np.sum(s > UNISOLVENCE_TOL * s[0]))
    return Unisolvence(rank == needed, rank, needed)


def check_unisolvence(patch: ElementPatch, m: int, scale: float | None = None) -> Unisolvence:
    """Full column rank of the collocation Vandermonde of the patch."""
    scale = patch.diameter if scale is None else scale
    return _check_rank(_vandermonde(patch, m, scale))


def fit_weights(patch: ElementPatch, m: int, scale: float) -> np.ndarray:
    """Weight matrix (L, #I(K)) from patch values to local coefficients.

    Coefficients refer to monomials centred at the barycenter of K and
    scaled by ``scale``. Centring pins the constant coefficient to the
    value at K, which eliminates the constraint; the remaining
    coefficients solve the reduced least squares problem by pivoted QR.
    """
    V = _vandermonde(patch, m, scale)
    status = _check_rank(V)
    if not status.ok:
        raise DeficientPatch(patch.element, status.rank, status.needed)
    n, L = V.shape
    k = patch.local_index
    # data shifted by the pinned value: g - g_K * 1
    shift = np.eye(n)
    shift[:, k] -= 1.0
    Vr = V[:, 1:]
    Q, R, piv = sla.qr(Vr, mode="economic", pivoting=True)
    sol = np.empty((L - 1, n))
    sol[piv] = sla.solve_triangular(R, Q.T @ shift)
    W = np.zeros((L, n))
    W[0, k] = 1.0
    W[1:] = sol
    return W


@dataclass(frozen=True, eq=False)
class ReconstructionOperator:
    """Linear map from element values (N, d) to a piecewise polynomial field."""

    mesh: Mesh
    degree: int
    patch_size: int
    patches: list = field(repr=False)
    weights: list = field(repr=False)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def n_dofs(self) -> int:
        return self.dim * self.mesh.n_elements

    @property
    def local_size(self) -> int:
        return basis_size(self.dim, self.degree)

    def support(self, element: int) -> np.ndarray:
        """Elements K' whose patch contains ``element`` (support of its basis)."""
        return self.support_map[element]

    @property
    def support_map(self) -> list:
        cached = self.__dict__.get("_support")
        if cached is None:
            buckets = [[] for _ in range(self.mesh.n_elements)]
            for p in self.patches:
                for k in p.members:
                    buckets[k].append(p.element)
            cached = [np.array(sorted(b), dtype=np.int64) for b in buckets]
            object.__setattr__(self, "_support", cached)
        return cached

    @property
    def matrix(self) -> sp.csr_matrix:
        """Sparse map from dofs (element-major, component-minor) to coefficients.

        Rows are ordered (element, component, monomial), i.e. ``coeffs.ravel()``
        of the resulting SolutionField.
        """
        cached = self.__dict__.get("_matrix")
        if cached is not None:
            return cached
        d, L, N = self.dim, self.local_size, self.mesh.n_elements
        rows, cols, vals = [], [], []
        for p, W in zip(self.patches, self.weights):
            n = p.size
            for c in range(d):
                r = (p.element * d + c) * L + np.arange(L)
                rows.append(np.repeat(r, n))
                cols.append(np.tile(p.members * d + c, L))
                vals.append(W.ravel())
        T = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(N * d * L, N * d),
        )
        object.__setattr__(self, "_matrix", T)
        return T

    def apply(self, values) -> SolutionField:
        values = np.asarray(values, dtype=float).reshape(self.mesh.n_elements, self.dim)
        coeffs = (self.matrix @ values.ravel()).reshape(self.mesh.n_elements, self.dim, self.local_size)
        return SolutionField(self.mesh, self.degree, coeffs)


def build_reconstruction(mesh: Mesh, m: int, patch_size: int | None = None) -> ReconstructionOperator:
    """Patches and weight matrices for every element.

    Raises DeficientPatch if any patch fails the unisolvence check.
    """
    if patch_size is None:
        patch_size = default_patch_size(mesh.dim, m)
    patches = build_patches(mesh, patch_size)
    scales = mesh.element_diameters
    weights = [fit_weights(p, m, scales[p.element]) for p in patches]
    return ReconstructionOperator(mesh, m, patch_size, patches, weights)


def reconstruct(operator: ReconstructionOperator, values) -> SolutionField:
    """Apply the reconstruction to per-element d-vectors."""
    return operator.apply(values)


def interpolate_smooth(operator: ReconstructionOperator, g) -> SolutionField:
    """Reconstruct from samples of ``g`` at all barycenters."""
    x = operator.mesh.element_barycenters
    vals = np.asarray(g(x), dtype=float).reshape(len(x), -1)
    if vals.shape[1] == 1 and operator.dim > 1:
        vals = np.repeat(vals, operator.dim, axis=1)
    return operator.apply(vals)


# --------------------------------------------------------------- stability


@dataclass
class LambdaReport:
    lambda_mK: np.ndarray
    h_K: np.ndarray
    patch_sizes: np.ndarray
    deficient: np.ndarray

    @property
    def lambda_m(self) -> float:
        """max_K (1 + Lambda_{m,K} sqrt(#I(K))); inf if any patch is deficient."""
        return float(np.max(1.0 + self.lambda_mK * np.sqrt(self.patch_sizes)))

    @property
    def n_deficient(self) -> int:
        return int(np.sum(self.deficient))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["element_id", "h_K", "patch_size", "lambda_mK"])
        for k, (h, s, lam) in enumerate(zip(self.h_K, self.patch_sizes, self.lambda_mK)):
            w.writerow([k, f"{h:.10e}", int(s), f"{lam:.10e}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _orthonormalize(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Coefficients G with columns orthonormal for the quadrature (V, w)."""
    M = V.T @ (w[:, None] * V)
    R = np.linalg.cholesky(M).T  # M = R^T R
    return sla.solve_triangular(R, np.eye(len(M)))


def orthonormal_basis(mesh: Mesh, element: int, m: int) -> np.ndarray:
    """Coefficients G (L, L) whose columns are L2(K)-orthonormal on element K.

    Relative to monomials centred at the barycenter, scaled by h_K.
    """
    pts, w = volume_points(mesh, 2 * m)
    hk = mesh.element_diameters[element]
    V = monomials((pts[element] - mesh.element_barycenters[element]) / hk, m)
    return _orthonormalize(V, w[element])


def lambda_from_points(points, center, hk, G, m, d) -> float:
    """(h_K^d sigma_min(B_K))^(-1/2) for collocation points and basis G."""
    P = monomials((np.asarray(points) - center) / hk, m) @ G
    B = P.T @ P
    s = np.linalg.svd(B, compute_uv=False)
    if s[-1] <= 1e-14 * s[0]:
        return float("inf")
    return float((hk**d * s[-1]) ** -0.5)


def compute_lambda(mesh: Mesh, patches: list, m: int) -> LambdaReport:
    d = mesh.dim
    N = mesh.n_elements
    pts, w = volume_points(mesh, 2 * m)
    lam = np.empty(N)
    deficient = np.zeros(N, dtype=bool)
    for p in patches:
        k = p.element
        hk = mesh.element_diameters[k]
        xk = mesh.element_barycenters[k]
        G = _orthonormalize(monomials((pts[k] - xk) / hk, m), w[k])
        if p.size < basis_size(d, m):
            lam[k], deficient[k] = np.inf, True
            continue
        lam[k] = lambda_from_points(p.points, xk, hk, G, m, d)
        deficient[k] = not np.isfinite(lam[k])
    return LambdaReport(
        lambda_mK=lam,
        h_K=mesh.element_diameters.copy(),
        patch_sizes=np.array([p.size for p in patches]),
        deficient=deficient,
    )
