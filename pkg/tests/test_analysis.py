import math

import numpy as np
import pytest

from quadcurl.analysis import (
    CSV_COLUMNS,
    ErrorRecord,
    SolutionField,
    energy_norms,
    error_energy,
    error_L2,
    observed_rates,
)
from quadcurl.assembly import local_projection
from quadcurl.errors import DegenerateH
from quadcurl.mesh import build_unit_cube_mesh, build_unit_square_mesh
from quadcurl.poly import basis_size
from quadcurl.problems import Example1, PolynomialSolution
from quadcurl.reconstruction import build_reconstruction, interpolate_smooth


def projected(mesh, m, exact):
    c = local_projection(mesh, m, exact)
    return SolutionField(mesh, m, c.reshape(mesh.n_elements, mesh.dim, basis_size(mesh.dim, m)))


def zero_field(mesh, m):
    return SolutionField(mesh, m, np.zeros((mesh.n_elements, mesh.dim, basis_size(mesh.dim, m))))


@pytest.mark.parametrize("d", [2, 3])
def test_own_polynomial_has_zero_error(d):
    mesh = build_unit_square_mesh(3) if d == 2 else build_unit_cube_mesh(1)
    exact = PolynomialSolution.random(d, 2, rng=0)
    u = projected(mesh, 2, exact)
    assert error_L2(u, exact) <= 1e-12
    assert error_energy(u, exact) <= 1e-10


@pytest.mark.parametrize("d", [2, 3])
def test_zero_field_against_constant_one(d):
    mesh = build_unit_square_mesh(2) if d == 2 else build_unit_cube_mesh(1)
    one = lambda x: np.ones((len(x), d))  # noqa: E731
    assert math.isclose(error_L2(zero_field(mesh, 2), one), math.sqrt(d), rel_tol=1e-13)


def test_zero_error_energy():
    mesh = build_unit_square_mesh(2)
    assert error_energy(zero_field(mesh, 2), None) == 0.0


def test_continuous_field_has_no_jump_terms():
    # boundary faces are one-sided, so pick fields whose traces vanish there:
    # (y(1-y), x(1-x)) has zero tangential trace, grad(xy) = (y, x) is curl free
    mesh = build_unit_square_mesh(4)
    tangential_free = lambda x: np.c_[x[:, 1] * (1 - x[:, 1]), x[:, 0] * (1 - x[:, 0])]  # noqa: E731
    curl_free = lambda x: np.c_[x[:, 1], x[:, 0]]  # noqa: E731
    parts = energy_norms(projected(mesh, 2, tangential_free), None, mesh=mesh, degree=2)
    assert parts["jump"] <= 1e-24 and parts["l2"] > 0
    parts = energy_norms(projected(mesh, 2, curl_free), None, mesh=mesh, degree=2)
    assert parts["jump_curl"] <= 1e-24 and parts["curl2"] <= 1e-24


def test_norm_dominance_and_extension():
    mesh = build_unit_square_mesh(8)
    op = build_reconstruction(mesh, 2)
    ex = Example1()
    u = interpolate_smooth(op, ex)
    e = error_energy(u, ex)
    e_ext = error_energy(u, ex, extended=True)
    assert e >= error_L2(u, ex)
    assert e <= e_ext <= 10 * e


def test_example1_l2_ratio():
    # interpolation of the smooth field: the L2 error ratio between n=8 and
    # n=16 is the decisive part of the reconstruction estimate
    ex = Example1()
    errs = [error_L2(interpolate_smooth(build_reconstruction(build_unit_square_mesh(n), 2), ex), ex)
            for n in (8, 16)]
    assert errs[0] / errs[1] > 2 * 0.7


def test_rates_simple():
    assert observed_rates([(1.0, 1.0), (0.5, 0.25)]) == [pytest.approx(2.0)]
    assert observed_rates([(1.0, 0.3), (0.5, 0.3)]) == [0.0]
    assert observed_rates([(1.0, 0.3)]) == []


def test_rates_degenerate_h():
    with pytest.raises(DegenerateH):
        observed_rates([(0.5, 1.0), (0.5, 0.5)])


def make_record(h, e):
    return ErrorRecord(m=2, d=2, h=h, n_elem=1, dofs=2, eta=40.0, patch_S=12, err_l2=e, err_energy=2 * e)


def test_rates_on_records():
    recs = observed_rates([make_record(0.2, 1.0), make_record(0.1, 0.5), make_record(0.05, 0.125)])
    assert recs[0].rate_l2 is None and recs[0].rate_energy is None
    assert recs[1].rate_l2 == pytest.approx(1.0)
    assert recs[2].rate_energy == pytest.approx(2.0)


def test_csv_row_schema():
    rec = observed_rates([make_record(0.2, 1.0), make_record(0.1, 0.5)])
    row0, row1 = rec[0].csv_row(), rec[1].csv_row()
    assert len(row0) == len(CSV_COLUMNS) == 14
    assert row0[CSV_COLUMNS.index("rate_l2")] == ""
    assert float(row1[CSV_COLUMNS.index("rate_l2")]) == pytest.approx(1.0)
    assert row1[CSV_COLUMNS.index("m")] == "2"


def test_field_point_evaluation():
    mesh = build_unit_square_mesh(3)
    exact = PolynomialSolution.random(2, 2, rng=4)
    u = projected(mesh, 2, exact)
    x = np.random.default_rng(0).random((25, 2))
    np.testing.assert_allclose(u(x), exact(x), atol=1e-12)
