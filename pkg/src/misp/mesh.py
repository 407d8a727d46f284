"""Structured meshes of the unit square used in the convergence studies.

Three families are provided:

* ``build_uniform_triangular``: an n x n grid of squares, each cut by the
  diagonal running from the lower-left to the upper-right corner.
* ``build_uniform_quadrilateral``: an n x n grid of axis-aligned squares.
* ``build_trapezoidal_quadrilateral``: a self-similar mesh of congruent
  trapezoids obtained by shifting the nodes of every other interior row
  alternately up and down.

Nodes and elements are numbered lexicographically by (row j, column i).
Global edges are oriented from the lower to the higher node index; every
element stores, for each of its local edges (v_k -> v_{k+1}), the sign
relating the local direction to the global one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

TRIANGULAR = "triangular"
QUADRILATERAL = "quadrilateral"


class MeshError(ValueError):
    """Raised for invalid mesh parameters or degenerate elements."""


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    family: str
    n: int = 0
    name: str = ""
    edges: np.ndarray = field(init=False, repr=False)
    element_edges: np.ndarray = field(init=False, repr=False)
    edge_signs: np.ndarray = field(init=False, repr=False)
    boundary_edges: np.ndarray = field(init=False, repr=False)
    boundary_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = _frozen(self.nodes, float)
        elements = _frozen(self.elements, np.int64)
        if self.family not in (TRIANGULAR, QUADRILATERAL):
            raise MeshError(f"unknown mesh family {self.family!r}")
        nv = 3 if self.family == TRIANGULAR else 4
        if elements.ndim != 2 or elements.shape[1] != nv:
            raise MeshError(f"{self.family} elements need {nv} vertices each")

        local = np.stack([elements, np.roll(elements, -1, axis=1)], axis=-1)
        lo = local.min(axis=-1).ravel()
        hi = local.max(axis=-1).ravel()
        pairs = np.stack([lo, hi], axis=1)
        edges, inverse, counts = np.unique(
            pairs, axis=0, return_inverse=True, return_counts=True
        )
        element_edges = inverse.reshape(elements.shape)
        signs = np.where(local[..., 0] < local[..., 1], 1, -1)

        boundary_edges = counts == 1
        boundary_nodes = np.zeros(len(nodes), dtype=bool)
        boundary_nodes[edges[boundary_edges].ravel()] = True

        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "edges", _frozen(edges, np.int64))
        object.__setattr__(self, "element_edges", _frozen(element_edges, np.int64))
        object.__setattr__(self, "edge_signs", _frozen(signs, np.int64))
        object.__setattr__(self, "boundary_edges", _frozen(boundary_edges, bool))
        object.__setattr__(self, "boundary_nodes", _frozen(boundary_nodes, bool))
        object.__setattr__(self, "_edge_counts", _frozen(counts, np.int64))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def vertices_per_element(self) -> int:
        return self.elements.shape[1]

    @property
    def edge_counts(self) -> np.ndarray:
        """Number of elements sharing each global edge."""
        return self._edge_counts

    def element_coords(self) -> np.ndarray:
        """Vertex coordinates, shape (num_elements, nv, 2)."""
        return self.nodes[self.elements]

    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_nodes)

    def euler_characteristic(self) -> int:
        return self.num_nodes - self.num_edges + self.num_elements

    def corner_jacobians(self) -> np.ndarray:
        """Signed Jacobian of the element map at each vertex.

        For triangles this is twice the signed area (one value per vertex,
        all equal). For quadrilaterals it is the cross product of the two
        edges meeting at the vertex, i.e. 4 * det(DF) at the reference corner.
        """
        xy = self.element_coords()
        nxt = np.roll(xy, -1, axis=1) - xy
        prv = np.roll(xy, 1, axis=1) - xy
        return nxt[..., 0] * prv[..., 1] - nxt[..., 1] * prv[..., 0]

    def dump(self, stream: TextIO) -> None:
        """Write the line-oriented text form (``node``/``elem``/``edge`` lines)."""
        for x, y in self.nodes:
            stream.write(f"node {float(x)!r} {float(y)!r}\n")
        for elem in self.elements:
            stream.write("elem " + " ".join(str(int(v)) for v in elem) + "\n")
        for a, b in self.edges:
            stream.write(f"edge {int(a)} {int(b)}\n")

    def dump_to(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            self.dump(fh)


def read_mesh_dump(stream: TextIO) -> Mesh:
    """Parse the output of :meth:`Mesh.dump`. Edge lines are checked, not trusted."""
    nodes, elems, edges = [], [], []
    for lineno, line in enumerate(stream, 1):
        parts = line.split()
        if not parts:
            continue
        kind, args = parts[0], parts[1:]
        if kind == "node":
            nodes.append([float(a) for a in args])
        elif kind == "elem":
            elems.append([int(a) for a in args])
        elif kind == "edge":
            edges.append([int(a) for a in args])
        else:
            raise MeshError(f"line {lineno}: unknown record {kind!r}")
    family = TRIANGULAR if len(elems[0]) == 3 else QUADRILATERAL
    mesh = Mesh(np.array(nodes), np.array(elems), family)
    if edges and not np.array_equal(np.array(edges), mesh.edges):
        raise MeshError("edge table in dump does not match the element connectivity")
    return mesh


def _grid_nodes(n: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    return np.column_stack([i.ravel() / n, j.ravel() / n])


def _cell_corners(n: int):
    j, i = np.divmod(np.arange(n * n), n)
    p00 = j * (n + 1) + i
    return p00, p00 + 1, p00 + n + 2, p00 + n + 1


def build_uniform_triangular(n: int) -> Mesh:
    """Uniform triangulation with all diagonals along (+1, +1)."""
    if n < 1:
        raise MeshError("subdivision count n must be >= 1")
    p00, p10, p11, p01 = _cell_corners(n)
    lower = np.column_stack([p00, p10, p11])
    upper = np.column_stack([p00, p11, p01])
    elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(_grid_nodes(n), elements, TRIANGULAR, n=n, name="uniform-tri")


def build_uniform_quadrilateral(n: int) -> Mesh:
    if n < 1:
        raise MeshError("subdivision count n must be >= 1")
    elements = np.column_stack(_cell_corners(n))
    return Mesh(_grid_nodes(n), elements, QUADRILATERAL, n=n, name="uniform-quad")


def build_trapezoidal_quadrilateral(n: int, offset: float = 0.4) -> Mesh:
    """Self-similar trapezoid mesh.

    Node (i, j) sits at x = i/n. Rows with odd j are shifted vertically by
    sigma_i * offset * h with sigma_i = -1, +1, -1, ... (sigma_0 = -1) and
    h = 1/n; even rows, including both boundary rows, stay flat. Every
    element is a trapezoid with vertical sides (1 - offset) h and
    (1 + offset) h, and the mesh at 2n is the mesh at n with each 2x2 block
    of cells replaced by a scaled copy of the n = 2 pattern.

    The default offset 0.4 gives the meshes behind the published
    trapezoid error table; offset 0.25 gives the coordinates of the usual
    schematic drawing of this family.
    """
    if n < 2 or n % 2:
        raise MeshError("trapezoidal mesh needs an even n >= 2")
    if not 0.0 <= offset < 0.5:
        raise MeshError(f"row offset must lie in [0, 0.5), got {offset}")
    nodes = _grid_nodes(n)
    j, i = np.divmod(np.arange(len(nodes)), n + 1)
    sigma = np.where(i % 2 == 0, -1.0, 1.0)
    shift = np.where(j % 2 == 1, sigma * offset / n, 0.0)
    nodes[:, 1] = j / n + shift
    elements = np.column_stack(_cell_corners(n))
    return Mesh(nodes, elements, QUADRILATERAL, n=n, name="trapezoid")


MESH_BUILDERS = {
    "uniform-tri": build_uniform_triangular,
    "uniform-quad": build_uniform_quadrilateral,
    "trapezoid": build_trapezoidal_quadrilateral,
}


def build_mesh(kind: str, n: int) -> Mesh:
    try:
        builder = MESH_BUILDERS[kind]
    except KeyError:
        raise MeshError(f"unknown mesh family {kind!r}") from None
    return builder(n)


@dataclass(frozen=True)
class MeshQualityReport:
    h: float
    h_K: np.ndarray
    rho_K: np.ndarray
    regularity: float


def _inscribed_diameter(a, b, c):
    area = 0.5 * np.abs((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                        - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))
    perim = (np.linalg.norm(b - a, axis=-1) + np.linalg.norm(c - b, axis=-1)
             + np.linalg.norm(a - c, axis=-1))
    return 4.0 * area / perim, area


def quality_report(mesh: Mesh) -> MeshQualityReport:
    """Element diameters h_K, inner sizes rho_K and the ratio max h_K / rho_K.

    For a quadrilateral Z1..Z4, rho_K is the smallest inscribed-circle
    diameter among the corner triangles (Z_{i-1}, Z_i, Z_{i+1}); for a
    triangle it is the inscribed-circle diameter of K itself.
    """
    xy = mesh.element_coords()
    diff = xy[:, :, None, :] - xy[:, None, :, :]
    h_K = np.sqrt((diff**2).sum(-1)).max(axis=(1, 2))

    if mesh.family == TRIANGULAR:
        rho, area = _inscribed_diameter(xy[:, 0], xy[:, 1], xy[:, 2])
        area = area[:, None]
    else:
        prv, nxt = np.roll(xy, 1, axis=1), np.roll(xy, -1, axis=1)
        rho, area = _inscribed_diameter(prv, xy, nxt)
        rho = rho.min(axis=1)

    scale = h_K[:, None] ** 2
    bad = np.flatnonzero((area <= 1e-14 * scale).any(axis=1))
    if bad.size:
        raise MeshError(f"element {int(bad[0])} is degenerate (zero-area corner triangle)")
    return MeshQualityReport(
        h=float(h_K.max()), h_K=h_K, rho_K=rho, regularity=float((h_K / rho).max())
    )
