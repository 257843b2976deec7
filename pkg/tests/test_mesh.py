import itertools

import numpy as np
import pytest

from quadcurl.errors import EmptyMesh, NonManifold, ParseError
from quadcurl.mesh import (
    Mesh,
    build_unit_cube_mesh,
    build_unit_square_mesh,
    face_connectivity,
    load_gmsh,
    write_gmsh,
)


def brute_force_faces(elements):
    """Count face multiplicities by enumerating vertex subsets."""
    counts = {}
    for el in elements:
        for face in itertools.combinations(sorted(el), len(el) - 1):
            counts[face] = counts.get(face, 0) + 1
    return counts


def test_unit_square_counts():
    m = build_unit_square_mesh(1)
    assert (m.n_elements, m.n_vertices, m.n_faces) == (2, 4, 5)
    m = build_unit_square_mesh(8)
    assert (m.n_elements, m.n_vertices) == (128, 81)
    assert abs(m.element_volumes.sum() - 1.0) < 1e-14
    assert np.isclose(m.h, np.sqrt(2) / 8)


def test_unit_cube_counts():
    m = build_unit_cube_mesh(1)
    assert m.n_elements == 6
    assert abs(m.element_volumes.sum() - 1.0) < 1e-14
    m = build_unit_cube_mesh(2)
    assert m.n_elements == 48
    assert np.all(m.signed_volumes > 0)


def test_cube_manifold():
    m = build_unit_cube_mesh(4)
    counts = brute_force_faces(m.elements.tolist())
    assert set(counts.values()) <= {1, 2}
    interior = m.interior_faces
    assert len(interior) == sum(1 for c in counts.values() if c == 2)
    assert np.all(m.face_elements[interior, 1] >= 0)


def test_two_triangle_square_has_one_interior_face():
    m = build_unit_square_mesh(1)
    assert len(m.interior_faces) == 1


def test_square_n2_face_split():
    m = build_unit_square_mesh(2)
    counts = brute_force_faces(m.elements.tolist())
    n_int = sum(1 for c in counts.values() if c == 2)
    n_bdy = sum(1 for c in counts.values() if c == 1)
    assert (n_bdy, n_int) == (8, 8)
    assert (len(m.boundary_faces), len(m.interior_faces)) == (n_bdy, n_int)


def test_faces_sorted_by_vertex_tuple():
    m = build_unit_square_mesh(3)
    fv = [tuple(f) for f in m.face_vertices.tolist()]
    assert fv == sorted(fv)
    assert all(list(f) == sorted(f) for f in fv)


def test_duplicated_element_is_nonmanifold():
    els = np.array([[0, 1, 2], [0, 1, 2]])
    with pytest.raises(NonManifold):
        face_connectivity(els)


def test_three_elements_on_a_face_is_nonmanifold():
    els = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(NonManifold):
        face_connectivity(els)


@pytest.mark.parametrize("mesh", [build_unit_square_mesh(5), build_unit_cube_mesh(3)], ids=["2d", "3d"])
def test_normals_and_diameters(mesh):
    n = mesh.face_normals
    assert np.max(np.abs(np.linalg.norm(n, axis=1) - 1)) <= 1e-14
    fe = mesh.face_elements
    xb = mesh.element_barycenters
    xf = mesh.face_barycenters
    # outward for plus, inward for minus
    assert np.all(np.einsum("fi,fi->f", xf - xb[fe[:, 0]], n) > 0)
    inner = mesh.interior_faces
    assert np.all(np.einsum("fi,fi->f", xf[inner] - xb[fe[inner, 1]], -n[inner]) > 0)
    assert np.all(fe[inner, 0] < fe[inner, 1])
    for side in (0, 1):
        ok = fe[:, side] >= 0
        assert np.all(mesh.face_diameters[ok] <= mesh.element_diameters[fe[ok, side]] + 1e-15)
    assert abs(mesh.element_volumes.sum() - 1.0) <= 1e-12


def test_face_objects():
    m = build_unit_square_mesh(2)
    faces = m.faces
    assert sum(f.is_boundary for f in faces) == 8
    f = next(f for f in faces if not f.is_boundary)
    assert f.plus < f.minus


def test_diameters_are_longest_edge():
    m = build_unit_square_mesh(4)
    assert np.allclose(m.element_diameters, np.sqrt(2) / 4)
    m = build_unit_cube_mesh(2)
    assert np.allclose(m.element_diameters, np.sqrt(3) / 2)


def test_vertex_neighbours_contain_self():
    m = build_unit_square_mesh(4)
    for k, nb in enumerate(m.vertex_neighbours):
        assert k in nb
    # interior triangle of a uniform mesh touches 13 elements through its vertices
    assert max(len(nb) for nb in m.vertex_neighbours) == 13


# ------------------------------------------------------------------ gmsh

SINGLE_TET_V2 = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
3
1 15 2 0 1 1
2 2 2 0 1 1 2 3
3 4 2 0 1 1 2 3 4
$EndElements
"""


def test_gmsh_single_tet(tmp_path):
    p = tmp_path / "tet.msh"
    p.write_text(SINGLE_TET_V2)
    m = load_gmsh(p)
    assert m.dim == 3 and m.n_elements == 1
    assert len(m.boundary_faces) == 4
    assert np.isclose(m.element_volumes.sum(), 1 / 6)


def test_gmsh_rejects_second_order_tet(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text(SINGLE_TET_V2.replace("3 4 2 0 1 1 2 3 4", "3 11 2 0 1 1 2 3 4 1 2 3 4 1 2"))
    with pytest.raises(ParseError):
        load_gmsh(p)


def test_gmsh_malformed_header(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 0 0\n")
    with pytest.raises(ParseError):
        load_gmsh(p)
    p.write_text("garbage\n")
    with pytest.raises(ParseError):
        load_gmsh(p)


def test_gmsh_without_volume_elements(tmp_path):
    p = tmp_path / "lines.msh"
    p.write_text(
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n2 1 0 0\n$EndNodes\n"
        "$Elements\n1\n1 1 2 0 1 1 2\n$EndElements\n"
    )
    with pytest.raises(EmptyMesh):
        load_gmsh(p)


@pytest.mark.parametrize("version", ["2.2", "4.1"])
@pytest.mark.parametrize("mesh", [build_unit_square_mesh(4), build_unit_cube_mesh(4)], ids=["2d", "3d"])
def test_gmsh_roundtrip(tmp_path, mesh, version):
    p = tmp_path / "mesh.msh"
    write_gmsh(mesh, p, version)
    back = load_gmsh(p)
    assert back.dim == mesh.dim
    assert back.n_elements == mesh.n_elements
    assert abs(back.element_volumes.sum() - mesh.element_volumes.sum()) == 0.0
    assert abs(back.element_volumes.sum() - 1.0) <= 1e-10
    np.testing.assert_array_equal(back.face_elements, mesh.face_elements)


def test_gmsh_surface_triangles_skipped_in_3d(tmp_path):
    text = SINGLE_TET_V2.replace("$Elements\n3\n", "$Elements\n3\n")
    p = tmp_path / "tet.msh"
    p.write_text(text)
    m = load_gmsh(p)
    assert m.elements.shape == (1, 4)


def test_mesh_requires_elements():
    with pytest.raises(EmptyMesh):
        Mesh(np.zeros((3, 2)), np.zeros((0, 3), dtype=int))
