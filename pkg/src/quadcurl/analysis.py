"""Piecewise polynomial solution fields, error norms and observed rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateH
from .mesh import Mesh
from .poly import basis_size, cross_normal, curl_powers, face_quadrature, monomials, simplex_quadrature

__all__ = [
    "SolutionField",
    "ErrorRecord",
    "CSV_COLUMNS",
    "error_L2",
    "error_energy",
    "energy_norms",
    "observed_rates",
    "face_points",
]


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Degree-m polynomial per element on monomials centred at the barycenter.

    ``coeffs`` has shape (n_elements, d, L); the local basis of element K
    is scaled by its diameter h_K.
    """

    mesh: Mesh
    degree: int
    coeffs: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def evaluate(self, elements, points, order: int = 0) -> np.ndarray:
        """curl^order of the field at physical points.

        ``elements`` has shape (n,), ``points`` (n, q, d). Returns (n, q, ncomp).
        """
        elements = np.asarray(elements)
        d, m = self.dim, self.degree
        L = basis_size(d, m)
        centers = self.mesh.element_barycenters[elements]
        scales = self.mesh.element_diameters[elements]
        V = monomials((points - centers[:, None, :]) / scales[:, None, None], m)
        C, nc = curl_powers(d, m, 3)[order]
        c = self.coeffs[elements].reshape(len(elements), d * L)
        curled = (c @ C.T).reshape(len(elements), nc, L) / scales[:, None, None] ** order
        return np.einsum("nql,ncl->nqc", V, curled)

    def __call__(self, points, elements=None) -> np.ndarray:
        """Values at points (n, d) given the elements containing them."""
        points = np.asarray(points, dtype=float)
        if elements is None:
            elements = locate(self.mesh, points)
        return self.evaluate(elements, points[:, None, :])[:, 0, :]


def locate(mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """Element containing each point (brute force over barycentric coordinates)."""
    c = mesh.element_coords
    T = np.linalg.inv((c[:, 1:] - c[:, :1]).transpose(0, 2, 1))
    out = np.empty(len(points), dtype=np.int64)
    for i, p in enumerate(points):
        lam = np.einsum("kij,kj->ki", T, p - c[:, 0])
        lam = np.hstack([1 - lam.sum(axis=1, keepdims=True), lam])
        out[i] = int(np.argmax(lam.min(axis=1)))
    return out


def volume_points(mesh: Mesh, exactness: int):
    """Quadrature points (N, q, d) and physical weights (N, q) for all elements."""
    rule = simplex_quadrature(mesh.dim, exactness)
    pts = rule.map_to(mesh.element_coords)
    w = rule.weights[None, :] * (mesh.element_volumes[:, None] * math.factorial(mesh.dim))
    return pts, w


def face_points(mesh: Mesh, faces, exactness: int):
    """Quadrature points (F, q, d) and physical weights (F, q) on faces."""
    rule = face_quadrature(mesh.dim, exactness)
    pts = rule.map_to(mesh.face_coords[faces])
    meas = mesh.face_measures[faces] * math.factorial(mesh.dim - 1)
    return pts, rule.weights[None, :] * meas[:, None]


def _as_exact(exact, order):
    """Resolve curl^order of an exact solution.

    ``exact`` is either a callable (order 0 only) or an object with a
    ``curl(order, x)`` method.
    """
    if hasattr(exact, "curl"):
        return lambda x: exact.curl(order, x)
    if order == 0:
        return exact
    raise TypeError("exact solution must provide curl(order, x) for energy norms")


def _eval_exact(fun, pts):
    flat = pts.reshape(-1, pts.shape[-1])
    vals = np.asarray(fun(flat), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals.reshape(pts.shape[:-1] + (vals.shape[-1],))


def error_L2(u_h: SolutionField, exact=None, exactness: int | None = None) -> float:
    """sqrt(sum_K int_K |u_h - u|^2) with over-integration (default 2m+4)."""
    mesh = u_h.mesh
    q = 2 * u_h.degree + 4 if exactness is None else exactness
    pts, w = volume_points(mesh, q)
    vals = u_h.evaluate(np.arange(mesh.n_elements), pts)
    if exact is not None:
        vals = vals - _eval_exact(_as_exact(exact, 0), pts)
    return float(np.sqrt(np.einsum("nq,nqc->", w, vals**2)))


def energy_norms(u_h: SolutionField | None, exact=None, exactness: int | None = None,
                 mesh: Mesh | None = None, degree: int | None = None) -> dict:
    """Squared contributions of the energy norm of ``u_h - exact``.

    Either argument may be omitted (treated as zero). Face terms evaluate
    the error side-wise, so an exact solution contributes no interior jump.
    Face weights use h_e. Keys: ``l2``, ``curl2``, ``jump``, ``jump_curl``,
    ``avg_curl3``, ``avg_curl2`` plus the totals ``energy`` and ``energy_ext``.
    """
    if u_h is not None:
        mesh, degree = u_h.mesh, u_h.degree
    d = mesh.dim
    q = 2 * degree + 4 if exactness is None else exactness
    ids = np.arange(mesh.n_elements)

    def err(elements, pts, order):
        out = 0.0
        if u_h is not None:
            out = u_h.evaluate(elements, pts, order)
        if exact is not None:
            out = out - _eval_exact(_as_exact(exact, order), pts)
        return out

    parts = {}
    pts, w = volume_points(mesh, q)
    parts["l2"] = float(np.einsum("nq,nqc->", w, err(ids, pts, 0) ** 2))
    parts["curl2"] = float(np.einsum("nq,nqc->", w, err(ids, pts, 2) ** 2))

    fe = mesh.face_elements
    normals = mesh.face_normals
    he = mesh.face_diameters
    acc = dict.fromkeys(["jump", "jump_curl", "avg_curl3", "avg_curl2"], 0.0)
    for faces, interior in ((mesh.interior_faces, True), (mesh.boundary_faces, False)):
        if len(faces) == 0:
            continue
        fpts, fw = face_points(mesh, faces, q)
        n = np.broadcast_to(normals[faces][:, None, :], fpts.shape)
        sides = [(fe[faces, 0], 1.0)] + ([(fe[faces, 1], -1.0)] if interior else [])
        jump = {0: 0.0, 1: 0.0}
        avg = {2: 0.0, 3: 0.0}
        for elems, sign in sides:
            for k in (0, 1):
                v = err(elems, fpts, k)
                jump[k] = jump[k] + _cross_batched(v, sign * n, d)
            for k in (2, 3):
                avg[k] = avg[k] + err(elems, fpts, k) / len(sides)
        hw = he[faces][:, None]
        acc["jump"] += float(np.sum(fw / hw**3 * np.sum(jump[0] ** 2, axis=-1)))
        acc["jump_curl"] += float(np.sum(fw / hw * np.sum(jump[1] ** 2, axis=-1)))
        acc["avg_curl3"] += float(np.sum(fw * hw**3 * np.sum(avg[3] ** 2, axis=-1)))
        acc["avg_curl2"] += float(np.sum(fw * hw * np.sum(avg[2] ** 2, axis=-1)))
    parts.update(acc)
    parts["energy"] = parts["l2"] + parts["curl2"] + parts["jump"] + parts["jump_curl"]
    parts["energy_ext"] = parts["energy"] + parts["avg_curl3"] + parts["avg_curl2"]
    return parts


def _cross_batched(values, normals, d):
    """cross_normal over (F, q, ncomp) values with (F, q, d) normals."""
    F, Q, nc = values.shape
    out = cross_normal(values.reshape(F * Q, nc), normals.reshape(F * Q, d), d)
    return out.reshape(F, Q, -1)


def error_energy(u_h: SolutionField | None, exact=None, extended: bool = False,
                 exactness: int | None = None, **kw) -> float:
    """Energy-norm error; ``extended`` adds the weighted face averages."""
    parts = energy_norms(u_h, exact, exactness, **kw)
    return math.sqrt(parts["energy_ext" if extended else "energy"])


# ------------------------------------------------------------------- records

CSV_COLUMNS = (
    "m", "d", "h", "n_elem", "dofs", "eta", "patch_S", "err_l2", "rate_l2",
    "err_energy", "rate_energy", "lambda_m", "solve_iters", "wall_ms",
)


@dataclass
class ErrorRecord:
    m: int
    d: int
    h: float
    n_elem: int
    dofs: int
    eta: float
    patch_S: int
    err_l2: float
    err_energy: float
    err_energy_ext: float = float("nan")
    lambda_m: float = float("nan")
    solve_iters: int = 0
    wall_ms: float = 0.0
    rate_l2: float | None = None
    rate_energy: float | None = None

    def csv_row(self) -> list:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, (int, np.integer)):
                return str(int(x))
            return f"{x:.10e}"

        return [fmt(getattr(self, c)) if c != "wall_ms" else f"{self.wall_ms:.0f}" for c in CSV_COLUMNS]


def _rate(e_prev, e_cur, h_prev, h_cur):
    if h_prev == h_cur:
        raise DegenerateH(f"repeated mesh size h={h_cur}")
    if e_prev == 0 or e_cur == 0:
        return float("nan")
    return math.log(e_prev / e_cur) / math.log(h_prev / h_cur)


def observed_rates(records: list) -> list:
    """Fill ``rate_l2``/``rate_energy`` pairwise; the first record gets none.

    Accepts ErrorRecords or (h, error) pairs; for pairs a list of rates
    (length n-1) is returned.
    """
    if records and not isinstance(records[0], ErrorRecord):
        hs = [float(h) for h, _ in records]
        es = [float(e) for _, e in records]
        return [_rate(es[i - 1], es[i], hs[i - 1], hs[i]) for i in range(1, len(hs))]
    out = []
    for i, rec in enumerate(records):
        if i == 0:
            out.append(replace(rec, rate_l2=None, rate_energy=None))
            continue
        prev = records[i - 1]
        out.append(
            replace(
                rec,
                rate_l2=_rate(prev.err_l2, rec.err_l2, prev.h, rec.h),
                rate_energy=_rate(prev.err_energy, rec.err_energy, prev.h, rec.h),
            )
        )
    return out
