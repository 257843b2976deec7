import numpy as np
import pytest

from quadcurl.poly import cross_normal
from quadcurl.problems import Example1, Example2, PolynomialSolution, ZeroSolution, get_problem

STEP = 1e-5


def fd_curl(fun, x, d):
    """Central-difference curl of a callable field in the package conventions."""
    vals = fun(x)
    grads = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = STEP
        grads.append((fun(x + e) - fun(x - e)) / (2 * STEP))
    g = np.stack(grads, axis=-1)  # (n, ncomp, d): g[:, c, i] = d comp_c / d x_i
    if d == 3:
        return np.stack([g[:, 2, 1] - g[:, 1, 2], g[:, 0, 2] - g[:, 2, 0], g[:, 1, 0] - g[:, 0, 1]], axis=1)
    if vals.shape[1] == 2:
        return (g[:, 1, 0] - g[:, 0, 1])[:, None]
    return np.stack([g[:, 0, 1], -g[:, 0, 0]], axis=1)


@pytest.mark.parametrize("problem", [Example1(), Example2()], ids=["ex1", "ex2"])
def test_closed_forms_against_finite_differences(problem):
    d = problem.dim
    x = np.random.default_rng(0).uniform(0.05, 0.95, (10, d))
    for k in range(4):
        fd = fd_curl(lambda y: problem.curl(k, y), x, d)
        exact = problem.curl(k + 1, x)
        assert np.abs(fd - exact).max() <= 1e-6 * np.abs(exact).max()


@pytest.mark.parametrize("problem", [Example1(), Example2()], ids=["ex1", "ex2"])
def test_load_is_curl4_plus_u(problem):
    x = np.random.default_rng(1).random((7, problem.dim))
    np.testing.assert_allclose(problem.f(x), problem.curl(4, x) + problem(x))


def test_example1_vanishes_on_boundary():
    p = Example1()
    t = np.linspace(0, 1, 11)
    for pts in (np.c_[t, 0 * t], np.c_[t, 0 * t + 1], np.c_[0 * t, t], np.c_[0 * t + 1, t]):
        assert np.abs(p(pts)).max() <= 1e-14
        assert np.abs(p.curl(1, pts)).max() <= 1e-12


def test_example1_boundary_data_zero():
    p = Example1()
    x = np.c_[np.linspace(0, 1, 5), np.zeros(5)]
    n = np.tile([0.0, -1.0], (5, 1))
    assert np.abs(p.g1(x, n)).max() <= 1e-14
    assert np.abs(p.g2(x, n)).max() <= 1e-12


def test_example1_is_divergence_free():
    p = Example1()
    x = np.random.default_rng(2).random((10, 2))
    div = 0
    for i in range(2):
        e = np.zeros(2)
        e[i] = STEP
        div = div + (p(x + e)[:, i] - p(x - e)[:, i]) / (2 * STEP)
    assert np.abs(div).max() <= 1e-6


def test_example2_boundary_data_formula():
    p = Example2()
    x = np.random.default_rng(3).random((4, 3))
    n = np.tile([1.0, 0.0, 0.0], (4, 1))
    np.testing.assert_allclose(p.g1(x, n), np.cross(p(x), n))
    np.testing.assert_allclose(p.g2(x, n), np.cross(p.curl(1, x), n))


@pytest.mark.parametrize("d", [2, 3])
def test_polynomial_solution_curls(d):
    p = PolynomialSolution.random(d, 3, rng=5)
    x = np.random.default_rng(4).random((6, d))
    for k in range(3):
        fd = fd_curl(lambda y: p.curl(k, y), x, d)
        np.testing.assert_allclose(fd, p.curl(k + 1, x), atol=1e-6 * max(1, np.abs(fd).max()))


def test_zero_solution_shapes():
    z = ZeroSolution(2)
    x = np.zeros((3, 2))
    assert z.curl(1, x).shape == (3, 1) and z.curl(2, x).shape == (3, 2)
    assert np.all(z.f(x) == 0)
    n = np.tile([1.0, 0.0], (3, 1))
    assert np.all(z.g2(x, n) == cross_normal(z.curl(1, x), n, 2))


def test_get_problem():
    assert isinstance(get_problem("ex1"), Example1)
    assert get_problem("poly3d", 2).dim == 3
    with pytest.raises(ValueError):
        get_problem("ex9")
