"""Simplicial meshes with face connectivity and element geometry.

Triangles (2D) and tetrahedra (3D). Faces are sorted by their sorted vertex
tuple; each face stores the element on its lower-index side as ``plus``
and the unit normal pointing out of it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, permutations
from math import factorial
from pathlib import Path

import numpy as np

from .errors import EmptyMesh, NonManifold, ParseError

__all__ = [
    "Mesh",
    "Face",
    "face_connectivity",
    "build_unit_square_mesh",
    "build_unit_cube_mesh",
    "load_gmsh",
    "write_gmsh",
]


@dataclass(frozen=True)
class Face:
    vertices: tuple
    diameter: float
    measure: float
    normal: np.ndarray
    plus: int
    minus: int | None

    @property
    def is_boundary(self) -> bool:
        return self.minus is None


def _face_normals(coords: np.ndarray, opposite: np.ndarray) -> np.ndarray:
    """Unit normals of faces (nf, d, d) pointing away from ``opposite`` (nf, d)."""
    d = coords.shape[-1]
    if d == 2:
        t = coords[:, 1] - coords[:, 0]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    else:
        n = np.cross(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    flip = np.einsum("fi,fi->f", opposite - coords[:, 0], n) > 0
    n[flip] *= -1
    return n


def _max_edge(coords: np.ndarray) -> np.ndarray:
    """Longest edge of each simplex, coords shape (n, k, dim)."""
    k = coords.shape[1]
    if k == 2:
        return np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
    return np.max(
        [np.linalg.norm(coords[:, i] - coords[:, j], axis=1) for i, j in combinations(range(k), 2)],
        axis=0,
    )


def face_connectivity(elements: np.ndarray):
    """Enumerate faces of a simplicial complex.

    Returns ``(face_vertices, face_elements, face_local)`` where
    ``face_vertices`` is (nf, d) sorted vertex ids, ``face_elements`` is
    (nf, 2) with -1 marking a missing neighbour, and ``face_local`` (nf, 2)
    holds the local index (opposite vertex) of the face in each neighbour.
    """
    elements = np.asarray(elements, dtype=np.int64)
    ne, nv = elements.shape
    if len(np.unique(np.sort(elements, axis=1), axis=0)) != ne:
        raise NonManifold("duplicated element")
    local = np.arange(nv)
    # face i of an element is opposite local vertex i
    tuples = np.stack([elements[:, np.delete(local, i)] for i in range(nv)], axis=1)
    tuples = np.sort(tuples, axis=2).reshape(ne * nv, nv - 1)
    owner = np.repeat(np.arange(ne), nv)
    which = np.tile(local, ne)
    order = np.lexsort(tuples.T[::-1])
    tuples, owner, which = tuples[order], owner[order], which[order]
    new = np.ones(len(tuples), dtype=bool)
    new[1:] = np.any(tuples[1:] != tuples[:-1], axis=1)
    starts = np.flatnonzero(new)
    counts = np.diff(np.append(starts, len(tuples)))
    if np.any(counts > 2):
        bad = tuples[starts[np.argmax(counts > 2)]]
        raise NonManifold(f"face {tuple(bad)} is shared by more than two elements")
    nf = len(starts)
    face_elements = np.full((nf, 2), -1, dtype=np.int64)
    face_local = np.full((nf, 2), -1, dtype=np.int64)
    face_elements[:, 0] = owner[starts]
    face_local[:, 0] = which[starts]
    two = counts == 2
    face_elements[two, 1] = owner[starts[two] + 1]
    face_local[two, 1] = which[starts[two] + 1]
    # owners within a group are sorted by element index already (stable lexsort)
    swap = two & (face_elements[:, 1] < face_elements[:, 0])
    face_elements[swap] = face_elements[swap][:, ::-1]
    face_local[swap] = face_local[swap][:, ::-1]
    if np.any(two & (face_elements[:, 0] == face_elements[:, 1])):
        raise NonManifold("an element references the same face twice")
    return tuples[starts], face_elements, face_local


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh. Immutable after construction."""

    vertices: np.ndarray
    elements: np.ndarray
    domain_measure: float | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        e = np.ascontiguousarray(self.elements, dtype=np.int64)
        if e.ndim != 2 or e.shape[0] == 0:
            raise EmptyMesh("mesh has no elements")
        if v.shape[1] not in (2, 3) or e.shape[1] != v.shape[1] + 1:
            raise ValueError(f"bad shapes: vertices {v.shape}, elements {e.shape}")
        v.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", e)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @cached_property
    def element_coords(self) -> np.ndarray:
        return self.vertices[self.elements]

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        c = self.element_coords
        J = (c[:, 1:] - c[:, :1]).transpose(0, 2, 1)
        return np.linalg.det(J) / factorial(self.dim)

    @cached_property
    def element_volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def element_diameters(self) -> np.ndarray:
        return _max_edge(self.element_coords)

    @cached_property
    def element_barycenters(self) -> np.ndarray:
        return self.element_coords.mean(axis=1)

    @property
    def h(self) -> float:
        return float(self.element_diameters.max())

    @cached_property
    def _connectivity(self):
        return face_connectivity(self.elements)

    @property
    def face_vertices(self) -> np.ndarray:
        return self._connectivity[0]

    @property
    def face_elements(self) -> np.ndarray:
        return self._connectivity[1]

    @property
    def face_local_index(self) -> np.ndarray:
        return self._connectivity[2]

    @property
    def n_faces(self) -> int:
        return self.face_vertices.shape[0]

    @cached_property
    def face_coords(self) -> np.ndarray:
        return self.vertices[self.face_vertices]

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit normals pointing out of the ``plus`` (first) element."""
        fe = self.face_elements[:, 0]
        opp_local = self.face_local_index[:, 0]
        opposite = self.vertices[self.elements[fe, opp_local]]
        return _face_normals(self.face_coords, opposite)

    @cached_property
    def face_measures(self) -> np.ndarray:
        c = self.face_coords
        if self.dim == 2:
            return np.linalg.norm(c[:, 1] - c[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @cached_property
    def face_diameters(self) -> np.ndarray:
        return _max_edge(self.face_coords)

    @cached_property
    def face_barycenters(self) -> np.ndarray:
        return self.face_coords.mean(axis=1)

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.face_elements[:, 1] < 0

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @property
    def faces(self) -> list:
        out = []
        for i in range(self.n_faces):
            plus, minus = (int(x) for x in self.face_elements[i])
            out.append(
                Face(
                    vertices=tuple(int(v) for v in self.face_vertices[i]),
                    diameter=float(self.face_diameters[i]),
                    measure=float(self.face_measures[i]),
                    normal=self.face_normals[i],
                    plus=plus,
                    minus=None if minus < 0 else minus,
                )
            )
        return out

    @cached_property
    def vertex_to_elements(self) -> list:
        """For each vertex, the sorted array of elements touching it."""
        ne, nv = self.elements.shape
        flat = self.elements.ravel()
        owner = np.repeat(np.arange(ne), nv)
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(self.n_vertices + 1))
        return [owner[order[bounds[i]:bounds[i + 1]]] for i in range(self.n_vertices)]

    @cached_property
    def vertex_neighbours(self) -> list:
        """Delta(K): elements whose closure meets the closure of K (K included)."""
        v2e = self.vertex_to_elements
        return [np.unique(np.concatenate([v2e[v] for v in el])) for el in self.elements]

    def summary(self) -> dict:
        return {
            "dim": self.dim,
            "n_vertices": self.n_vertices,
            "n_elements": self.n_elements,
            "n_faces": self.n_faces,
            "n_boundary_faces": int(self.boundary_mask.sum()),
            "h": self.h,
            "h_min": float(self.element_diameters.min()),
            "measure": float(self.element_volumes.sum()),
        }


# ------------------------------------------------------------ structured meshes


def build_unit_square_mesh(n: int) -> Mesh:
    """Uniform triangulation of (0,1)^2 with 2 n^2 triangles."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    a = (i + (n + 1) * j).ravel()
    b, c, d = a + 1, a + n + 2, a + n + 1
    tris = np.stack([np.stack([a, b, c], 1), np.stack([a, c, d], 1)], axis=1).reshape(-1, 3)
    return Mesh(vertices, tris, domain_measure=1.0)


def build_unit_cube_mesh(n: int) -> Mesh:
    """Kuhn triangulation of (0,1)^3 with 6 n^3 positively oriented tetrahedra."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    I, J, K = (a.ravel() for a in np.meshgrid(*(np.arange(n),) * 3, indexing="ij"))
    tets = []
    for perm in permutations(range(3)):
        corner = [I, J, K]
        ids = [vid(*corner)]
        step = [I.copy(), J.copy(), K.copy()]
        for axis in perm:
            step[axis] = step[axis] + 1
            ids.append(vid(*step))
        tets.append(np.stack(ids, axis=1))
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    c = vertices[tets]
    neg = np.linalg.det(c[:, 1:] - c[:, :1]) < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]
    return Mesh(vertices, tets, domain_measure=1.0)


# ------------------------------------------------------------------- gmsh I/O

# element type code -> (topological dim, node count)
_GMSH_SIMPLEX = {15: (0, 1), 1: (1, 2), 2: (2, 3), 4: (3, 4)}


def _sections(text: str) -> dict:
    lines = text.splitlines()
    out = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("$"):
            raise ParseError(f"line {i + 1}: expected section header, got {line[:40]!r}")
        name = line[1:]
        end = "$End" + name
        try:
            j = next(k for k in range(i + 1, len(lines)) if lines[k].strip() == end)
        except StopIteration:
            raise ParseError(f"section ${name} is not terminated") from None
        out[name] = [ln.split() for ln in lines[i + 1:j] if ln.strip()]
        i = j + 1
    return out


def _parse_v2(sec):
    nodes = sec["Nodes"]
    count = int(nodes[0][0])
    tags = np.array([int(r[0]) for r in nodes[1:count + 1]])
    coords = np.array([[float(v) for v in r[1:4]] for r in nodes[1:count + 1]])
    rows = sec["Elements"]
    count = int(rows[0][0])
    cells = []
    for r in rows[1:count + 1]:
        etype, ntags = int(r[1]), int(r[2])
        cells.append((etype, [int(v) for v in r[3 + ntags:]]))
    return tags, coords, cells


def _parse_v4(sec):
    rows = sec["Nodes"]
    nblocks = int(rows[0][0])
    pos = 1
    tags, coords = [], []
    for _ in range(nblocks):
        parametric, n = int(rows[pos][2]), int(rows[pos][3])
        if parametric:
            raise ParseError("parametric node blocks are not supported")
        tags.extend(int(r[0]) for r in rows[pos + 1:pos + 1 + n])
        coords.extend([float(v) for v in r[:3]] for r in rows[pos + 1 + n:pos + 1 + 2 * n])
        pos += 1 + 2 * n
    rows = sec["Elements"]
    nblocks = int(rows[0][0])
    pos = 1
    cells = []
    for _ in range(nblocks):
        etype, n = int(rows[pos][2]), int(rows[pos][3])
        cells.extend((etype, [int(v) for v in r[1:]]) for r in rows[pos + 1:pos + 1 + n])
        pos += 1 + n
    return np.array(tags), np.array(coords, dtype=float).reshape(-1, 3), cells


def load_gmsh(path) -> Mesh:
    """Read an ASCII Gmsh MSH 2.2 or 4.1 file made of linear simplices.

    Connectivity is rebuilt from the top-dimensional elements only; lower
    dimensional entities and physical tags are ignored.
    """
    text = Path(path).read_text(encoding="utf-8")
    sec = _sections(text)
    for name in ("MeshFormat", "Nodes", "Elements"):
        if name not in sec:
            raise ParseError(f"missing ${name} section")
    try:
        version = sec["MeshFormat"][0][0]
        if sec["MeshFormat"][0][1] != "0":
            raise ParseError("binary MSH files are not supported")
        if version.startswith("2"):
            tags, coords, cells = _parse_v2(sec)
        elif version.startswith("4"):
            tags, coords, cells = _parse_v4(sec)
        else:
            raise ParseError(f"unsupported MSH version {version}")
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed MSH content: {exc}") from exc

    for etype, nodes in cells:
        if etype not in _GMSH_SIMPLEX:
            raise ParseError(f"unsupported element type {etype}")
        if len(nodes) != _GMSH_SIMPLEX[etype][1]:
            raise ParseError(f"element of type {etype} has {len(nodes)} nodes")
    dims = [_GMSH_SIMPLEX[t][0] for t, _ in cells]
    if not dims or max(dims) < 2:
        raise EmptyMesh("no triangle or tetrahedron elements found")
    dim = max(dims)
    volume = [nodes for (t, nodes), k in zip(cells, dims) if k == dim]

    index = {t: i for i, t in enumerate(tags)}
    try:
        elements = np.array([[index[v] for v in nodes] for nodes in volume], dtype=np.int64)
    except KeyError as exc:
        raise ParseError(f"element references unknown node {exc.args[0]}") from None
    used = np.unique(elements)
    remap = np.full(len(tags), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices = coords[used, :dim]
    return Mesh(vertices, remap[elements])


def write_gmsh(mesh: Mesh, path, version: str = "2.2") -> None:
    """Write the mesh as ASCII MSH (volume elements only)."""
    etype = 2 if mesh.dim == 2 else 4
    xyz = np.zeros((mesh.n_vertices, 3))
    xyz[:, :mesh.dim] = mesh.vertices
    nv, ne = mesh.n_vertices, mesh.n_elements
    lines = ["$MeshFormat"]
    if version.startswith("2"):
        lines += ["2.2 0 8", "$EndMeshFormat", "$Nodes", str(nv)]
        lines += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(xyz.tolist())]
        lines += ["$EndNodes", "$Elements", str(ne)]
        lines += [
            f"{k + 1} {etype} 2 1 1 " + " ".join(str(v + 1) for v in el)
            for k, el in enumerate(mesh.elements.tolist())
        ]
    else:
        lines += ["4.1 0 8", "$EndMeshFormat", "$Nodes", f"1 {nv} 1 {nv}", f"{mesh.dim} 1 0 {nv}"]
        lines += [str(i + 1) for i in range(nv)]
        lines += [f"{x!r} {y!r} {z!r}" for x, y, z in xyz.tolist()]
        lines += ["$EndNodes", "$Elements", f"1 {ne} 1 {ne}", f"{mesh.dim} 1 {etype} {ne}"]
        lines += [
            f"{k + 1} " + " ".join(str(v + 1) for v in el)
            for k, el in enumerate(mesh.elements.tolist())
        ]
    lines += ["$EndElements", ""]
    Path(path).write_text("\n".join(lines), encoding="utf-8")
