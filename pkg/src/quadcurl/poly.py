"""Scaled monomial bases, exact curl calculus and simplex quadrature.

Polynomials are stored as coefficient arrays over the scaled monomials
``((x - center) / scale) ** alpha`` with multi-indices ordered by total
degree and then lexicographically (descending in the leading exponent).
A field with ``ncomp`` components is a ``(ncomp, L)`` coefficient array;
linear operators act on the flattened, component-major vector.

Two-dimensional curl conventions follow the planar embedding into 3D:
the curl of a vector is a scalar, the curl of a scalar ``q`` is
``(dq/dy, -dq/dx)``, ``a x n`` of two vectors is a scalar and ``c x n``
of a scalar with a vector is ``(-n2 c, n1 c)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import ArityMismatch, UnsupportedDegree

__all__ = [
    "multi_indices",
    "basis_size",
    "monomials",
    "ScaledMonomialBasis",
    "PolyVectorField",
    "diff_matrix",
    "curl_matrix",
    "curl_powers",
    "curl_field",
    "cross_normal",
    "QuadratureRule",
    "simplex_quadrature",
    "face_quadrature",
    "simplex_moment",
    "MAX_EXACTNESS",
]

MAX_EXACTNESS = 30


@lru_cache(maxsize=None)
def multi_indices(d: int, m: int) -> np.ndarray:
    """Exponents of all monomials of degree <= m in d variables, shape (L, d)."""
    out = []

    def rec(prefix, remaining, k):
        if k == d - 1:
            out.append(prefix + (remaining,))
            return
        for a in range(remaining, -1, -1):
            rec(prefix + (a,), remaining - a, k + 1)

    for deg in range(m + 1):
        rec((), deg, 0)
    arr = np.array(out, dtype=np.int64).reshape(-1, d)
    arr.setflags(write=False)
    return arr


def basis_size(d: int, m: int) -> int:
    return comb(m + d, d)


def monomials(local: np.ndarray, m: int) -> np.ndarray:
    """Evaluate all monomials of degree <= m at already-scaled coordinates.

    ``local`` has shape (..., d); the result has shape (..., L).
    """
    local = np.asarray(local, dtype=float)
    d = local.shape[-1]
    exps = multi_indices(d, m)
    # powers[..., i, k] = local[..., i] ** k
    powers = local[..., :, None] ** np.arange(m + 1)
    out = np.ones(local.shape[:-1] + (len(exps),))
    for i in range(d):
        out *= powers[..., i, exps[:, i]]
    return out


@lru_cache(maxsize=None)
def _index_map(d: int, m: int) -> dict:
    return {tuple(a): k for k, a in enumerate(multi_indices(d, m))}


@lru_cache(maxsize=None)
def _unit_diff(d: int, m: int, direction: int) -> np.ndarray:
    exps = multi_indices(d, m)
    lookup = _index_map(d, m)
    D = np.zeros((len(exps), len(exps)))
    for k, a in enumerate(exps):
        if a[direction] == 0:
            continue
        b = a.copy()
        b[direction] -= 1
        D[lookup[tuple(b)], k] = a[direction]
    D.setflags(write=False)
    return D


def diff_matrix(d: int, m: int, direction: int, scale: float = 1.0) -> np.ndarray:
    """Matrix of d/dx_direction acting on scaled-monomial coefficients."""
    if not 0 <= direction < d:
        raise ValueError(f"direction {direction} out of range for d={d}")
    return _unit_diff(d, m, direction) / scale


def curl_matrix(d: int, m: int, ncomp: int, scale: float = 1.0) -> np.ndarray:
    """Curl as a matrix on component-major coefficient vectors.

    2D: ``ncomp=2`` maps to a scalar, ``ncomp=1`` maps to a vector.
    3D: ``ncomp`` must be 3.
    """
    D = [diff_matrix(d, m, i, scale) for i in range(d)]
    L = D[0].shape[0]
    Z = np.zeros((L, L))
    if d == 2 and ncomp == 2:
        return np.hstack([-D[1], D[0]])
    if d == 2 and ncomp == 1:
        return np.vstack([D[1], -D[0]])
    if d == 3 and ncomp == 3:
        Dx, Dy, Dz = D
        return np.block([[Z, -Dz, Dy], [Dz, Z, -Dx], [-Dy, Dx, Z]])
    raise ArityMismatch(f"curl undefined for d={d} with {ncomp} components")


def curl_ncomp(d: int, ncomp: int) -> int:
    if d == 2:
        return 1 if ncomp == 2 else 2
    return 3


@lru_cache(maxsize=None)
def curl_powers(d: int, m: int, k_max: int = 3) -> tuple:
    """Unit-scale matrices of curl^k applied to a d-vector field, k = 0..k_max.

    Returns a tuple of (matrix, ncomp_out) pairs; ``curl^k`` on a basis
    with scale ``s`` is the unit matrix divided by ``s**k``.
    """
    L = basis_size(d, m)
    mats = [(np.eye(d * L), d)]
    for _ in range(k_max):
        prev, nc = mats[-1]
        C = curl_matrix(d, m, nc)
        mats.append((C @ prev, curl_ncomp(d, nc)))
    for M, _ in mats:
        M.setflags(write=False)
    return tuple(mats)


def cross_normal(values: np.ndarray, normal: np.ndarray, d: int) -> np.ndarray:
    """``q x n`` at points.

    ``values`` has shape (npts, ncomp, ...) and ``normal`` (npts, d) or (d,).
    In 2D a vector gives a scalar (ncomp 1) and a scalar gives a vector.
    """
    n = np.asarray(normal, dtype=float)
    if n.ndim == 1:
        n = np.broadcast_to(n, (values.shape[0], d))
    extra = (None,) * (values.ndim - 2)
    nx = [n[(slice(None), i) + extra] for i in range(d)]
    ncomp = values.shape[1]
    if d == 2 and ncomp == 2:
        q1, q2 = values[:, 0], values[:, 1]
        return (q1 * nx[1] - q2 * nx[0])[:, None]
    if d == 2 and ncomp == 1:
        c = values[:, 0]
        return np.stack([-nx[1] * c, nx[0] * c], axis=1)
    if d == 3 and ncomp == 3:
        q1, q2, q3 = values[:, 0], values[:, 1], values[:, 2]
        return np.stack(
            [q2 * nx[2] - q3 * nx[1], q3 * nx[0] - q1 * nx[2], q1 * nx[1] - q2 * nx[0]],
            axis=1,
        )
    raise ArityMismatch(f"cross product undefined for d={d} with {ncomp} components")


@dataclass(frozen=True)
class ScaledMonomialBasis:
    """Monomials ``((x - center) / scale) ** alpha`` with ``|alpha| <= degree``."""

    degree: int
    center: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def size(self) -> int:
        return basis_size(self.dim, self.degree)

    @property
    def exponents(self) -> np.ndarray:
        return multi_indices(self.dim, self.degree)

    def local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.center) / self.scale

    def __call__(self, points) -> np.ndarray:
        return monomials(self.local(points), self.degree)

    def diff(self, direction: int) -> np.ndarray:
        return diff_matrix(self.dim, self.degree, direction, self.scale)


@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial field with ``ncomp`` components on a scaled monomial basis."""

    basis: ScaledMonomialBasis
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        if c.shape[1] != self.basis.size:
            raise ArityMismatch(f"expected {self.basis.size} coefficients, got {c.shape[1]}")
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def __call__(self, points) -> np.ndarray:
        """Values at points, shape (npts, ncomp)."""
        return self.basis(points) @ self.coeffs.T

    def curl(self) -> "PolyVectorField":
        return curl_field(self, self.basis.dim)

    def __add__(self, other):
        return PolyVectorField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return PolyVectorField(self.basis, self.coeffs - other.coeffs)

    def __neg__(self):
        return PolyVectorField(self.basis, -self.coeffs)


def curl_field(field: PolyVectorField, d: int) -> PolyVectorField:
    if field.basis.dim != d:
        raise ArityMismatch(f"field lives in {field.basis.dim}D, asked for d={d}")
    C = curl_matrix(d, field.basis.degree, field.ncomp, field.basis.scale)
    out = C @ field.coeffs.ravel()
    return PolyVectorField(field.basis, out.reshape(curl_ncomp(d, field.ncomp), -1))


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference simplex with vertices 0, e_1, ..., e_d.

    ``points`` are barycentric, shape (nq, d+1); weights sum to 1/d!.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1

    @property
    def cartesian(self) -> np.ndarray:
        return self.points[:, 1:]

    def map_to(self, vertices: np.ndarray) -> np.ndarray:
        """Physical points for simplices ``vertices`` of shape (..., d+1, dim)."""
        return np.einsum("qv,...vx->...qx", self.points, vertices)


def _gauss_jacobi01(n: int, alpha: int):
    t, w = roots_jacobi(n, alpha, 0) if alpha else roots_legendre(n)
    return (t + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_quadrature(d: int, exactness: int) -> QuadratureRule:
    """Collapsed-coordinate Gauss-Jacobi product rule of given exactness.

    d = 0 gives the single point rule on a vertex (used for 1D faces).
    """
    if exactness < 0 or exactness > MAX_EXACTNESS:
        raise UnsupportedDegree(f"exactness {exactness} not in [0, {MAX_EXACTNESS}]")
    if d == 0:
        return QuadratureRule(np.ones((1, 1)), np.ones(1), exactness)
    n = exactness // 2 + 1
    if d == 1:
        u, w = _gauss_jacobi01(n, 0)
        cart = u[:, None]
        wts = w
    elif d == 2:
        u, wu = _gauss_jacobi01(n, 1)
        v, wv = _gauss_jacobi01(n, 0)
        U, V = np.meshgrid(u, v, indexing="ij")
        cart = np.stack([U, V * (1 - U)], axis=-1).reshape(-1, 2)
        wts = np.outer(wu, wv).ravel()
    elif d == 3:
        u, wu = _gauss_jacobi01(n, 2)
        v, wv = _gauss_jacobi01(n, 1)
        s, ws = _gauss_jacobi01(n, 0)
        U, V, S = np.meshgrid(u, v, s, indexing="ij")
        cart = np.stack(
            [U, V * (1 - U), S * (1 - U) * (1 - V)], axis=-1
        ).reshape(-1, 3)
        wts = np.einsum("i,j,k->ijk", wu, wv, ws).ravel()
    else:
        raise UnsupportedDegree(f"no simplex rule for d={d}")
    bary = np.hstack([1.0 - cart.sum(axis=1, keepdims=True), cart])
    bary.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(bary, wts, exactness)


def face_quadrature(d: int, exactness: int) -> QuadratureRule:
    """Rule on the reference (d-1)-simplex used for faces of d-simplices."""
    return simplex_quadrature(d - 1, exactness)


def simplex_moment(alpha) -> float:
    """Exact integral of ``x^alpha`` over the reference simplex."""
    alpha = [int(a) for a in alpha]
    num = np.prod([factorial(a) for a in alpha])
    return float(num) / factorial(len(alpha) + sum(alpha))
