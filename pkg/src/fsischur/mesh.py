"""Structured triangular meshes of the fluid and solid boxes and the
shared multiplier grid on the horizontal interface y = 1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, MeshMismatchError

SIDE_TAGS = ("left", "right", "bottom", "top")
INTERFACE_TAG = "interface"
REGIONS = ("fluid", "solid")

# Interface node coordinates must agree between the two meshes to this
# tolerance before they are considered matching.
MATCH_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming triangulation of an axis-aligned rectangle.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
        Vertex coordinates.
    triangles : (n_tri, 3) int array
        Vertex indices, counterclockwise.
    boundary_edges : (n_edges, 2) int array
        Vertex pairs traversed counterclockwise around the rectangle.
    boundary_tags : (n_edges,) str array
        One of ``left``/``right``/``bottom``/``top``/``interface`` per edge.
    region : str
        ``'fluid'`` or ``'solid'``. Decides which side carries the
        ``interface`` tag.

    Immutable after construction; safe to share across threads.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    region: str

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        """Signed areas; positive for counterclockwise triangles."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges_with_tag(self, tag):
        """Boundary edges carrying ``tag``, as an (k, 2) index array."""
        mask = self.boundary_tags == tag
        return self.boundary_edges[mask]

    def interface_vertex_x(self):
        """Sorted x-coordinates of the vertices on the interface."""
        edges = self.edges_with_tag(INTERFACE_TAG)
        ids = np.unique(edges)
        return np.sort(self.nodes[ids, 0])


def build_structured_mesh(n, x_range=(0.0, 1.0), y_range=(0.0, 1.0),
                          region="fluid"):
    """Uniform n-by-n triangulation of a rectangle.

    Each grid cell is split along its bottom-left to top-right diagonal,
    giving ``(n+1)**2`` nodes and ``2*n**2`` counterclockwise triangles.
    For a fluid mesh the top side is tagged ``interface``; for a solid
    mesh the bottom side is.

    Parameters
    ----------
    n : int
        Subdivisions per side, at least 1.
    x_range, y_range : pair of float
        Extents of the rectangle; must be nondegenerate.
    region : str
        ``'fluid'`` or ``'solid'``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"subdivision count must be >= 1, got {n}")
    if region not in REGIONS:
        raise InvalidArgumentError(f"region must be one of {REGIONS}")
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError("coordinate ranges must be increasing")

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    t = 0
    for j in range(n):
        for i in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v11 = vid(i + 1, j + 1)
            v01 = vid(i, j + 1)
            triangles[t] = (v00, v10, v11)
            triangles[t + 1] = (v00, v11, v01)
            t += 2

    edges = []
    tags = []
    for i in range(n):  # bottom, left to right
        edges.append((vid(i, 0), vid(i + 1, 0)))
        tags.append("bottom")
    for j in range(n):  # right, upward
        edges.append((vid(n, j), vid(n, j + 1)))
        tags.append("right")
    for i in range(n):  # top, right to left
        edges.append((vid(n - i, n), vid(n - i - 1, n)))
        tags.append("top")
    for j in range(n):  # left, downward
        edges.append((vid(0, n - j), vid(0, n - j - 1)))
        tags.append("left")

    tags = np.array(tags, dtype=object)
    interface_side = "top" if region == "fluid" else "bottom"
    tags[tags == interface_side] = INTERFACE_TAG

    return TriangleMesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=np.array(edges, dtype=np.int64),
        boundary_tags=tags,
        region=region,
    )


def fluid_mesh(n):
    """Fluid box [0,1] x [0,1], interface on top."""
    return build_structured_mesh(n, (0.0, 1.0), (0.0, 1.0), region="fluid")


def solid_mesh(n):
    """Solid box [0,1] x [1,2], interface on the bottom."""
    return build_structured_mesh(n, (0.0, 1.0), (1.0, 2.0), region="solid")


@dataclass(frozen=True, eq=False)
class InterfaceGrid:
    """One-dimensional multiplier grid along the interface y = 1.

    ``nodes_x`` holds the multiplier node x-coordinates; consecutive
    nodes bound the segments. The grid keeps every ``coarsening``-th
    fluid vertex, so segments have width ``coarsening * h_fluid``.
    """

    nodes_x: np.ndarray
    coarsening: int

    @property
    def n_segments(self):
        return len(self.nodes_x) - 1

    @property
    def segments(self):
        """(n_segments, 2) array of segment endpoints."""
        return np.column_stack([self.nodes_x[:-1], self.nodes_x[1:]])


def build_interface_grid(mesh_f, mesh_s, k=1):
    """Multiplier grid shared by matching fluid and solid meshes.

    Parameters
    ----------
    mesh_f, mesh_s : TriangleMesh
        Fluid and solid meshes whose interface vertices must coincide.
    k : int
        Coarsening factor; the grid keeps every k-th fluid interface
        vertex, so k must divide the interface segment count.
    """
    xf = mesh_f.interface_vertex_x()
    xs = mesh_s.interface_vertex_x()
    if len(xf) != len(xs) or np.max(np.abs(xf - xs)) > MATCH_TOL:
        raise MeshMismatchError(
            "fluid and solid interface vertices do not coincide "
            f"({len(xf)} vs {len(xs)} nodes)")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidArgumentError(f"coarsening factor must be >= 1, got {k}")
    if (len(xf) - 1) % k != 0:
        raise InvalidArgumentError(
            f"coarsening factor {k} does not divide {len(xf) - 1} interface "
            "segments")
    return InterfaceGrid(nodes_x=xf[::k].copy(), coarsening=int(k))


def export_mesh(mesh, path):
    """Write a plain-text dump of the mesh, one record per line.

    Records: ``node i x y``, ``tri i a b c``, ``edge a b tag``.
    """
    with open(path, "w") as fh:
        fh.write(f"region {mesh.region}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"node {i} {x:.17g} {y:.17g}\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"tri {i} {a} {b} {c}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"edge {a} {b} {tag}\n")
