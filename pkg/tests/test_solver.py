import numpy as np
import pytest
import scipy.sparse as sp

from quadcurl.assembly import assemble
from quadcurl.errors import NoConvergence, NonSPD
from quadcurl.mesh import build_unit_square_mesh
from quadcurl.problems import Example1
from quadcurl.reconstruction import build_reconstruction
from quadcurl.solver import block_jacobi, conjugate_gradient, solve


@pytest.fixture(scope="module")
def system():
    op = build_reconstruction(build_unit_square_mesh(4), 2)
    return assemble(op, Example1())


def test_zero_rhs():
    A = sp.identity(5, format="csr")
    rep = solve((A, np.zeros(5)))
    assert np.all(rep.x == 0) and rep.iterations == 0


@pytest.mark.parametrize("method", ["direct", "sparse", "cg"])
def test_identity(method):
    A = sp.identity(6, format="csr")
    b = np.eye(6)[0]
    rep = solve((A, b), method=method, block=2)
    np.testing.assert_allclose(rep.x, b)


def test_cg_matches_dense(system):
    dense = solve(system, method="direct").x
    cg = solve(system, method="cg", tol=1e-12)
    assert np.linalg.norm(cg.x - dense) / np.linalg.norm(dense) <= 1e-8
    assert cg.residual <= 1e-12


def test_sparse_matches_dense(system):
    dense = solve(system, method="direct").x
    lu = solve(system, method="sparse")
    assert np.linalg.norm(lu.x - dense) / np.linalg.norm(dense) <= 1e-8
    assert lu.residual <= 1e-10


def test_cg_error_monotone_in_energy_norm(system):
    # PCG minimises the A-norm of the error over growing Krylov spaces
    A = system.matrix
    x_ref = solve(system, method="direct").x
    errs = []

    def record(x):
        e = x - x_ref
        errs.append(float(e @ (A @ e)))

    conjugate_gradient(A, system.rhs, block_jacobi(A, 2), tol=1e-9, callback=record)
    assert len(errs) > 5
    assert all(b <= a * (1 + 1e-8) for a, b in zip(errs, errs[1:]))


def test_cg_breakdown_on_indefinite():
    A = sp.diags([1.0, -1.0, 2.0]).tocsr()
    with pytest.raises(NonSPD):
        conjugate_gradient(A, np.ones(3))


def test_cg_max_iter():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((40, 40))
    A = Q @ Q.T + 1e-6 * np.eye(40)
    with pytest.raises(NoConvergence) as info:
        conjugate_gradient(A, rng.standard_normal(40), tol=1e-14, max_iter=3)
    assert info.value.iterations == 3


def test_direct_rejects_indefinite():
    A = sp.diags([1.0, -1.0]).tocsr()
    with pytest.raises(NonSPD):
        solve((A, np.ones(2)), method="direct")


def test_nonfinite_rhs():
    with pytest.raises(ValueError):
        solve((sp.identity(2, format="csr"), np.array([1.0, np.nan])))


def test_unknown_method():
    with pytest.raises(ValueError):
        solve((sp.identity(2, format="csr"), np.ones(2)), method="magic")


def test_block_jacobi_exact_on_block_diagonal():
    rng = np.random.default_rng(3)
    blocks = [rng.standard_normal((3, 3)) for _ in range(4)]
    blocks = [b @ b.T + 3 * np.eye(3) for b in blocks]
    A = sp.block_diag(blocks).tocsr()
    r = rng.standard_normal(12)
    np.testing.assert_allclose(A @ block_jacobi(A, 3)(r), r, atol=1e-12)


def test_deterministic(system):
    a = solve(system, method="cg").x
    b = solve(system, method="cg").x
    assert np.array_equal(a, b)
