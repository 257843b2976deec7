"""Manufactured exact solutions with closed-form curls and data.

Each solution exposes ``curl(k, x)`` for k = 0..4, the right-hand side
``f = curl^4 u + u`` and the boundary traces ``g1 = u x n`` and
``g2 = (curl u) x n``. Points are arrays of shape (n, d); values come back
as (n, ncomp).
"""
from __future__ import annotations

import numpy as np

from .poly import PolyVectorField, ScaledMonomialBasis, cross_normal, curl_field

__all__ = ["ExactSolution", "Example1", "Example2", "PolynomialSolution", "ZeroSolution", "get_problem"]

PI = np.pi


class ExactSolution:
    dim: int = 2

    def curl(self, k: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.curl(0, x)

    def f(self, x):
        return self.curl(4, x) + self.curl(0, x)

    def g1(self, x, normals):
        return cross_normal(self.curl(0, x), normals, self.dim)

    def g2(self, x, normals):
        return cross_normal(self.curl(1, x), normals, self.dim)


class Example1(ExactSolution):
    """u = curl(sin^3(pi x) sin^3(pi y)) on the unit square; u = 0 on the boundary."""

    dim = 2

    def curl(self, k, x):
        sx, sy = np.sin(PI * x[:, 0]), np.sin(PI * x[:, 1])
        cx, cy = np.cos(PI * x[:, 0]), np.cos(PI * x[:, 1])
        sx2, sy2 = sx**2, sy**2
        if k == 0:
            return np.stack([3 * PI * sx**3 * sy2 * cy, -3 * PI * sx2 * sy**3 * cx], axis=1)
        if k == 1:
            val = 6 * PI**2 * (3 * sx**3 * sy**3 - sx**3 * sy - sx * sy**3)
            return val[:, None]
        if k == 2:
            a = 9 * sx2 * sy2
            return 6 * PI**3 * np.stack(
                [(a - sx2 - 3 * sy2) * sx * cy, (-a + 3 * sx2 + sy2) * sy * cx], axis=1
            )
        if k == 3:
            val = 12 * PI**4 * (27 * sx2 * sy2 - 14 * sx2 - 14 * sy2 + 6) * sx * sy
            return val[:, None]
        if k == 4:
            p4 = PI**4
            first = 3 * PI * (324 * p4 * sx2 * sy2 - 56 * p4 * sx2 - 168 * p4 * sy2 + 24 * p4) * sx * cy
            second = 3 * PI * (-324 * p4 * sx2 * sy2 + 168 * p4 * sx2 + 56 * p4 * sy2 - 24 * p4) * sy * cx
            return np.stack([first, second], axis=1)
        raise ValueError(f"curl order {k} not available")


class Example2(ExactSolution):
    """u = (sin pi y sin pi z, sin pi z sin pi x, sin pi x sin pi y) on the unit cube.

    u is divergence free with curl^2 u = 2 pi^2 u.
    """

    dim = 3

    def curl(self, k, x):
        s = np.sin(PI * x)
        c = np.cos(PI * x)
        sx, sy, sz = s.T
        cx, cy, cz = c.T
        u = np.stack([sy * sz, sz * sx, sx * sy], axis=1)
        w = PI * np.stack([sx * (cy - cz), sy * (cz - cx), sz * (cx - cy)], axis=1)
        if k not in range(5):
            raise ValueError(f"curl order {k} not available")
        base = u if k % 2 == 0 else w
        return (2 * PI**2) ** (k // 2) * base


class PolynomialSolution(ExactSolution):
    """Global polynomial vector field; curls computed exactly."""

    def __init__(self, field: PolyVectorField):
        self.dim = field.basis.dim
        self.field = field
        chain = [field]
        for _ in range(4):
            chain.append(curl_field(chain[-1], self.dim))
        self._chain = chain

    @classmethod
    def random(cls, d: int, m: int, rng=None, center=None):
        rng = np.random.default_rng(rng)
        center = np.full(d, 0.5) if center is None else center
        basis = ScaledMonomialBasis(m, center, 1.0)
        return cls(PolyVectorField(basis, rng.standard_normal((d, basis.size))))

    def curl(self, k, x):
        return self._chain[k](np.asarray(x, dtype=float))


class ZeroSolution(ExactSolution):
    def __init__(self, dim=2):
        self.dim = dim

    def curl(self, k, x):
        nc = 1 if self.dim == 2 and k % 2 == 1 else self.dim
        return np.zeros((len(x), nc))


def get_problem(example: str, m: int = 2, seed: int = 0) -> ExactSolution:
    """Problem by identifier: ``ex1``, ``ex2``, ``poly2d`` or ``poly3d``."""
    if example == "ex1":
        return Example1()
    if example == "ex2":
        return Example2()
    if example == "poly2d":
        return PolynomialSolution.random(2, m, seed)
    if example == "poly3d":
        return PolynomialSolution.random(3, m, seed)
    raise ValueError(f"unknown example {example!r}")
