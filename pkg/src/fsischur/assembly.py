"""Assembly of every sparse block of the coupled discrete system:
mass/stiffness blocks per subdomain, the pressure and interface coupling
matrices, time-dependent load vectors, and Dirichlet elimination.

Vector-valued fields are stored component-major: the global index of
scalar dof ``i`` in component ``r`` is ``r * n_scalar + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .elements import (ReferenceElement, edge_shape_functions,
                       quadrature_segment, quadrature_triangle)
from .errors import InvalidArgumentError, MeshMismatchError
from .mesh import InterfaceGrid, TriangleMesh

DEFAULT_VOLUME_ORDER = 5
DEFAULT_SEGMENT_ORDER = 5   # 3-point Gauss


class ScalarSpace:
    """Scalar Lagrange space of degree 1 or 2 on a triangle mesh.

    Attributes
    ----------
    coords : (n_dofs, 2) array
        Dof coordinates; mesh vertices first, then edge midpoints (P2).
    cells : (n_tri, n_local) int array
        Local-to-global dof map, local order matching ReferenceElement.
    """

    def __init__(self, mesh: TriangleMesh, degree: int):
        self.mesh = mesh
        self.element = ReferenceElement(degree)
        self.degree = degree

        tris = mesh.triangles
        if degree == 1:
            self.coords = mesh.nodes.copy()
            self.cells = tris.copy()
            self._edge_mid = {}
        else:
            edge_mid = {}
            mids = []
            next_id = mesh.n_nodes
            cells = np.empty((mesh.n_triangles, 6), dtype=np.int64)
            cells[:, :3] = tris
            for t, (a, b, c) in enumerate(tris):
                for e, (p, q) in enumerate(((a, b), (b, c), (c, a))):
                    key = (p, q) if p < q else (q, p)
                    mid = edge_mid.get(key)
                    if mid is None:
                        mid = next_id
                        edge_mid[key] = mid
                        mids.append(0.5 * (mesh.nodes[p] + mesh.nodes[q]))
                        next_id += 1
                    cells[t, 3 + e] = mid
            self.coords = np.vstack([mesh.nodes, np.array(mids)])
            self.cells = cells
            self._edge_mid = edge_mid

        self.n_dofs = len(self.coords)
        # per-triangle affine geometry (constant Jacobians)
        p = mesh.nodes[tris]
        j11 = p[:, 1, 0] - p[:, 0, 0]
        j21 = p[:, 1, 1] - p[:, 0, 1]
        j12 = p[:, 2, 0] - p[:, 0, 0]
        j22 = p[:, 2, 1] - p[:, 0, 1]
        det = j11 * j22 - j12 * j21
        inv_t = np.empty((mesh.n_triangles, 2, 2))
        inv_t[:, 0, 0] = j22 / det
        inv_t[:, 0, 1] = -j21 / det
        inv_t[:, 1, 0] = -j12 / det
        inv_t[:, 1, 1] = j11 / det
        self.jac_inv_t = inv_t          # inverse-transpose Jacobians
        self.jac_det = np.abs(det)
        self.vertex_origin = p[:, 0, :]

    def edge_dofs(self, a, b):
        """Trace dofs along edge (a, b), ordered start to end."""
        if self.degree == 1:
            return [a, b]
        key = (a, b) if a < b else (b, a)
        return [a, self._edge_mid[key], b]

    def dofs_on_tags(self, tags):
        """Sorted scalar dofs lying on boundary edges with the given tags."""
        found = set()
        ids = []
        for (a, b), tag in zip(self.mesh.boundary_edges,
                               self.mesh.boundary_tags):
            if tag in tags:
                found.add(tag)
                ids.extend(self.edge_dofs(a, b))
        missing = set(tags) - found
        if missing:
            raise InvalidArgumentError(
                f"mesh has no boundary edges tagged {sorted(missing)}")
        return np.unique(np.array(ids, dtype=np.int64))

    def tagged_edges(self, tag):
        """List of (dofs, p0, p1) for boundary edges carrying ``tag``."""
        out = []
        for (a, b), etag in zip(self.mesh.boundary_edges,
                                self.mesh.boundary_tags):
            if etag == tag:
                out.append((self.edge_dofs(a, b),
                            self.mesh.nodes[a], self.mesh.nodes[b]))
        if not out:
            raise InvalidArgumentError(
                f"mesh has no boundary edges tagged {tag!r}")
        return out

    def tabulate(self, rule):
        """Reference basis values/gradients at the rule's points."""
        return self.element.tabulate(rule.points)

    def physical_gradients(self, rule):
        """Basis gradients per element, shape (n_tri, n_q, n_basis, 2)."""
        _, ref_grads = self.tabulate(rule)
        return np.einsum("eab,qib->eqia", self.jac_inv_t, ref_grads)

    def quadrature_points(self, rule):
        """Physical quadrature points, shape (n_tri, n_q, 2)."""
        p = self.mesh.nodes[self.mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        return (self.vertex_origin[:, None, :]
                + np.einsum("eab,qb->eqa", jac, rule.points))


@dataclass(frozen=True)
class BoundaryLayout:
    """Which outer sides carry Neumann data; the rest are Dirichlet.

    The interface never appears here: it is coupled through the
    multiplier, not constrained.
    """

    fluid_neumann: tuple = ("left", "right")
    solid_neumann: tuple = ()

    def __post_init__(self):
        fluid_sides = {"left", "right", "bottom"}
        solid_sides = {"left", "right", "top"}
        if not set(self.fluid_neumann) <= fluid_sides:
            raise InvalidArgumentError(
                f"fluid Neumann tags must be within {sorted(fluid_sides)}")
        if not set(self.solid_neumann) <= solid_sides:
            raise InvalidArgumentError(
                f"solid Neumann tags must be within {sorted(solid_sides)}")

    @property
    def fluid_dirichlet(self):
        return tuple(t for t in ("left", "right", "bottom")
                     if t not in self.fluid_neumann)

    @property
    def solid_dirichlet(self):
        return tuple(t for t in ("left", "right", "top")
                     if t not in self.solid_neumann)


@dataclass(eq=False)
class DofMap:
    """Per-field dof bookkeeping for one fluid/solid mesh pair."""

    velocity: ScalarSpace
    pressure: ScalarSpace
    displacement: ScalarSpace
    grid: InterfaceGrid
    layout: BoundaryLayout
    dirichlet_velocity: np.ndarray = field(init=False)
    dirichlet_displacement: np.ndarray = field(init=False)

    def __post_init__(self):
        sv = self.velocity.dofs_on_tags(self.layout.fluid_dirichlet) \
            if self.layout.fluid_dirichlet else np.empty(0, dtype=np.int64)
        sd = self.displacement.dofs_on_tags(self.layout.solid_dirichlet) \
            if self.layout.solid_dirichlet else np.empty(0, dtype=np.int64)
        self.dirichlet_velocity = vector_dofs(self.velocity, sv)
        self.dirichlet_displacement = vector_dofs(self.displacement, sd)

    @property
    def n_u(self):
        return 2 * self.velocity.n_dofs

    @property
    def n_p(self):
        return self.pressure.n_dofs

    @property
    def n_eta(self):
        return 2 * self.displacement.n_dofs

    @property
    def n_gamma(self):
        return 2 * len(self.grid.nodes_x)


def vector_dofs(space, scalar_dofs):
    """Vector dof indices (both components) for a set of scalar dofs."""
    scalar_dofs = np.asarray(scalar_dofs, dtype=np.int64)
    return np.concatenate([scalar_dofs, scalar_dofs + space.n_dofs])


def interpolate_vector(space, fn, t):
    """Component-major coefficients of the nodal interpolant of fn(x,y,t)."""
    vals = np.asarray(fn(space.coords[:, 0], space.coords[:, 1], t))
    return np.concatenate([vals[..., 0], vals[..., 1]])


def interpolate_scalar(space, fn, t):
    return np.asarray(fn(space.coords[:, 0], space.coords[:, 1], t))


def _finalize(coo):
    out = coo.tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def _scatter(values, rows, cols, shape):
    return _finalize(sp.coo_matrix(
        (values.ravel(), (rows.ravel(), cols.ravel())), shape=shape))


def _cell_index_grids(cells):
    rows = np.broadcast_to(cells[:, :, None],
                           (cells.shape[0], cells.shape[1], cells.shape[1]))
    cols = np.broadcast_to(cells[:, None, :], rows.shape)
    return rows, cols


def assemble_mass(space, density, order=DEFAULT_VOLUME_ORDER):
    """Vector mass matrix, block-diagonal over the two components.

    Entry ((r,i),(r,j)) is ``density * int(phi_j phi_i)``.
    """
    if density <= 0:
        raise InvalidArgumentError(f"density must be positive, got {density}")
    rule = quadrature_triangle(order)
    vals, _ = space.tabulate(rule)
    local = density * np.einsum("q,e,qi,qj->eij",
                                rule.weights, space.jac_det, vals, vals)
    rows, cols = _cell_index_grids(space.cells)
    n = space.n_dofs
    scalar = _scatter(local, rows, cols, (n, n))
    return _finalize(sp.block_diag((scalar, scalar), format="csr"))


def _gradient_products(space, rule):
    """A[a][b][e,i,j] = int over element e of d_a(phi_i) d_b(phi_j)."""
    g = space.physical_gradients(rule)
    w = rule.weights
    det = space.jac_det
    prods = {}
    for a in range(2):
        for b in range(2):
            prods[a, b] = np.einsum("q,e,eqi,eqj->eij",
                                    w, det, g[:, :, :, a], g[:, :, :, b])
    return prods


def assemble_strain_stiffness(space, coeff, order=DEFAULT_VOLUME_ORDER):
    """Stiffness of the symmetric-gradient form ``coeff * (D(u), D(v))``.

    ``coeff`` is the full factor multiplying the form (``2*nu``). The
    result is symmetric positive semidefinite with rigid-body modes in
    its kernel. Block (r, c) holds
    ``(coeff/2) * (delta_rc grad.grad + d_c(phi_i) d_r(phi_j))``.
    """
    if coeff <= 0:
        raise InvalidArgumentError(
            f"viscosity coefficient must be positive, got {coeff}")
    rule = quadrature_triangle(order)
    prods = _gradient_products(space, rule)
    nu = 0.5 * coeff
    lap = prods[0, 0] + prods[1, 1]
    rows, cols = _cell_index_grids(space.cells)
    n = space.n_dofs
    blocks = [[None, None], [None, None]]
    for r in range(2):
        for c in range(2):
            local = prods[c, r].copy()
            if r == c:
                local += lap
            blocks[r][c] = _scatter(nu * local, rows, cols, (n, n))
    return _finalize(sp.bmat(blocks, format="csr"))


def assemble_divdiv(space, lam, order=DEFAULT_VOLUME_ORDER):
    """Stiffness of ``lam * (div u, div v)``; positive semidefinite."""
    if lam < 0:
        raise InvalidArgumentError(
            f"divergence coefficient must be nonnegative, got {lam}")
    rule = quadrature_triangle(order)
    prods = _gradient_products(space, rule)
    rows, cols = _cell_index_grids(space.cells)
    n = space.n_dofs
    blocks = [[_scatter(lam * prods[r, c], rows, cols, (n, n))
               for c in range(2)] for r in range(2)]
    return _finalize(sp.bmat(blocks, format="csr"))


def assemble_pressure_coupling(vspace, pspace, order=DEFAULT_VOLUME_ORDER):
    """Pressure-divergence coupling of the Taylor-Hood pair.

    Returns the (n_u, n_p) matrix with entry ((r,i), j) equal to
    ``int(psi_j d_r(phi_i))``, so that its transpose applied to a
    velocity vector evaluates ``(div u, psi_j)`` for every pressure
    basis function.
    """
    if (vspace.degree, pspace.degree) != (2, 1):
        raise InvalidArgumentError(
            "pressure coupling requires the (P2, P1) pair, got "
            f"(P{vspace.degree}, P{pspace.degree})")
    if vspace.mesh is not pspace.mesh:
        raise InvalidArgumentError(
            "velocity and pressure spaces must share one mesh")
    rule = quadrature_triangle(order)
    g = vspace.physical_gradients(rule)
    pvals, _ = pspace.tabulate(rule)
    nv, np_ = vspace.n_dofs, pspace.n_dofs
    vcells, pcells = vspace.cells, pspace.cells
    rows = np.broadcast_to(vcells[:, :, None],
                           (len(vcells), vcells.shape[1], pcells.shape[1]))
    cols = np.broadcast_to(pcells[:, None, :], rows.shape)
    parts = []
    for r in range(2):
        local = np.einsum("q,e,eqi,qj->eij",
                          rule.weights, vspace.jac_det, g[:, :, :, r], pvals)
        parts.append(_scatter(local, rows, cols, (nv, np_)))
    return _finalize(sp.vstack(parts, format="csr"))


def _segment_of(grid, x, tol=1e-12):
    idx = int(np.searchsorted(grid.nodes_x, x + tol) - 1)
    return min(max(idx, 0), grid.n_segments - 1)


def assemble_interface_coupling(space, grid, order=DEFAULT_SEGMENT_ORDER):
    """Interface coupling between a subdomain field and the multiplier.

    Rows are multiplier dofs, columns field dofs; the matrix is
    block-diagonal over the two components, each block holding
    ``<phi_j, mu_i>`` on the interface. Every interface mesh edge must
    sit inside a single multiplier segment.
    """
    rule = quadrature_segment(order)
    xi, w = rule.points, rule.weights
    shapes = edge_shape_functions(space.degree, xi)   # (n_q, n_trace)
    n_lm = len(grid.nodes_x)
    rows, cols, vals = [], [], []
    for dofs, p0, p1 in space.tagged_edges("interface"):
        x0, x1 = p0[0], p1[0]
        length = abs(x1 - x0)
        xq = x0 + xi * (x1 - x0)
        seg = _segment_of(grid, 0.5 * (x0 + x1))
        lo, hi = grid.nodes_x[seg], grid.nodes_x[seg + 1]
        if min(x0, x1) < lo - 1e-12 or max(x0, x1) > hi + 1e-12:
            raise MeshMismatchError(
                "interface edge straddles a multiplier segment; the grid "
                "does not match the mesh")
        hat_r = (xq - lo) / (hi - lo)
        hats = np.stack([1.0 - hat_r, hat_r], axis=1)   # (n_q, 2)
        local = length * np.einsum("q,qi,qj->ij", w, hats, shapes)
        for li, lm in enumerate((seg, seg + 1)):
            for lj, dof in enumerate(dofs):
                rows.append(lm)
                cols.append(dof)
                vals.append(local[li, lj])
    scalar = _finalize(sp.coo_matrix(
        (vals, (rows, cols)), shape=(n_lm, space.n_dofs)))
    return _finalize(sp.block_diag((scalar, scalar), format="csr"))


def assemble_body_load(space, f, t, order=DEFAULT_VOLUME_ORDER):
    """Load vector with entries ``int(f(.,t) . phi_i)`` per component."""
    rule = quadrature_triangle(order)
    vals, _ = space.tabulate(rule)
    pts = space.quadrature_points(rule)
    fv = np.asarray(f(pts[:, :, 0], pts[:, :, 1], t))
    out = np.zeros(2 * space.n_dofs)
    for r in range(2):
        local = np.einsum("q,e,qi,eq->ei",
                          rule.weights, space.jac_det, vals, fv[..., r])
        np.add.at(out, space.cells + r * space.n_dofs, local)
    return out


def assemble_neumann_load(space, tags, data, t, order=DEFAULT_SEGMENT_ORDER):
    """Boundary load with entries ``int(data . phi_i)`` over tagged edges."""
    rule = quadrature_segment(order)
    xi, w = rule.points, rule.weights
    shapes = edge_shape_functions(space.degree, xi)
    out = np.zeros(2 * space.n_dofs)
    for tag in tags:
        for dofs, p0, p1 in space.tagged_edges(tag):
            length = float(np.hypot(*(p1 - p0)))
            pq = p0[None, :] + xi[:, None] * (p1 - p0)[None, :]
            dv = np.asarray(data(pq[:, 0], pq[:, 1], t))
            for r in range(2):
                contrib = length * np.einsum("q,qi,q->i", w, shapes,
                                             dv[..., r])
                out[np.asarray(dofs) + r * space.n_dofs] += contrib
    return out


def constrain_matrix(matrix, dofs):
    """Zero the rows and columns of ``dofs`` and set unit diagonals.

    Symmetric elimination: SPD blocks remain SPD.
    """
    n = matrix.shape[0]
    free = np.ones(n)
    free[dofs] = 0.0
    pinned = 1.0 - free
    zf = sp.diags(free)
    return _finalize(zf @ matrix @ zf + sp.diags(pinned))


def matrix_columns(matrix, dofs):
    """Column slice used to lift inhomogeneous Dirichlet data."""
    return matrix.tocsc()[:, dofs].tocsr()


def zero_columns(matrix, dofs):
    n = matrix.shape[1]
    free = np.ones(n)
    free[dofs] = 0.0
    return _finalize(matrix @ sp.diags(free))


def apply_dirichlet(matrix, rhs, dofs, values):
    """Eliminate Dirichlet dofs from a square system.

    Rows/columns of constrained dofs are zeroed with a unit diagonal;
    the right-hand side receives the lifted contributions and the
    prescribed values on constrained entries.

    Returns
    -------
    (matrix, rhs) : modified copies.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    new_rhs = rhs - matrix_columns(matrix, dofs) @ values
    new_rhs[dofs] = values
    return constrain_matrix(matrix, dofs), new_rhs


def export_matrix_market(path, matrix):
    """Write one assembled block in Matrix Market format."""
    mmwrite(path, sp.coo_matrix(matrix))


@dataclass(eq=False)
class BlockOperatorSet:
    """Every assembled block of the coupled system plus its dof map.

    Shapes: mass/stiffness fluid blocks are (n_u, n_u); the pressure
    coupling is (n_u, n_p); solid blocks are (n_eta, n_eta); interface
    couplings are (n_gamma, n_u) and (n_gamma, n_eta).
    """

    dofs: DofMap
    mass_f: sp.csr_matrix
    stiff_f: sp.csr_matrix
    press: sp.csr_matrix
    mass_s: sp.csr_matrix
    stiff_s: sp.csr_matrix
    divdiv: sp.csr_matrix
    coupling_f: sp.csr_matrix
    coupling_s: sp.csr_matrix
    quad_order: int


def build_dof_map(mesh_f, mesh_s, grid, layout=None):
    layout = layout or BoundaryLayout()
    return DofMap(velocity=ScalarSpace(mesh_f, 2),
                  pressure=ScalarSpace(mesh_f, 1),
                  displacement=ScalarSpace(mesh_s, 2),
                  grid=grid, layout=layout)


def build_blocks(mesh_f, mesh_s, grid, *, rho_f=1.0, rho_s=1.0, nu_f=1.0,
                 nu_s=1.0, lam=1.0, layout=None,
                 quad_order=DEFAULT_VOLUME_ORDER):
    """Assemble all blocks for one mesh pair and multiplier grid."""
    dofs = build_dof_map(mesh_f, mesh_s, grid, layout)
    vel, pre, dis = dofs.velocity, dofs.pressure, dofs.displacement
    return BlockOperatorSet(
        dofs=dofs,
        mass_f=assemble_mass(vel, rho_f, quad_order),
        stiff_f=assemble_strain_stiffness(vel, 2.0 * nu_f, quad_order),
        press=assemble_pressure_coupling(vel, pre, quad_order),
        mass_s=assemble_mass(dis, rho_s, quad_order),
        stiff_s=assemble_strain_stiffness(dis, 2.0 * nu_s, quad_order),
        divdiv=assemble_divdiv(dis, lam, quad_order),
        coupling_f=assemble_interface_coupling(vel, grid),
        coupling_s=assemble_interface_coupling(dis, grid),
        quad_order=quad_order,
    )
