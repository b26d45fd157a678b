import numpy as np
import pytest
import scipy.sparse as sp

import fsischur as f
from fsischur.assembly import (ScalarSpace, interpolate_vector,
                               matrix_columns, vector_dofs, zero_columns)
from fsischur.mesh import TriangleMesh

import oracles


def reference_triangle_mesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return TriangleMesh(
        nodes=nodes,
        triangles=np.array([[0, 1, 2]]),
        boundary_edges=np.array([[0, 1], [1, 2], [2, 0]]),
        boundary_tags=np.array(["bottom", "right", "left"], dtype=object),
        region="fluid")


def max_abs(matrix):
    return np.max(np.abs(matrix)) if matrix.size else 0.0


def sym_defect(matrix):
    return abs(matrix - matrix.T).max()


# --- mass ------------------------------------------------------------------


def test_p1_mass_on_reference_triangle():
    space = ScalarSpace(reference_triangle_mesh(), 1)
    M = f.assemble_mass(space, 1.0).toarray()
    block = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24
    assert np.max(np.abs(M[:3, :3] - block)) <= 1e-15
    assert np.max(np.abs(M[3:, 3:] - block)) <= 1e-15
    assert np.max(np.abs(M[:3, 3:])) == 0.0


def test_mass_total_is_density_area_components(setup):
    blocks = setup(3).blocks
    assert abs(blocks.mass_f.sum() - 2.0) <= 1e-12
    assert abs(blocks.mass_s.sum() - 2.0) <= 1e-12


def test_mass_linearity_in_density(setup):
    space = setup(2).dofs.velocity
    m1 = f.assemble_mass(space, 1.0)
    m2 = f.assemble_mass(space, 2.0)
    assert abs(m2 - 2.0 * m1).max() <= 1e-14


def test_mass_rejects_nonpositive_density(setup):
    with pytest.raises(f.InvalidArgumentError):
        f.assemble_mass(setup(2).dofs.velocity, 0.0)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_mass_spd_dense(setup, n):
    for name in ("mass_f", "mass_s"):
        M = getattr(setup(n).blocks, name).toarray()
        assert np.linalg.eigvalsh(M).min() > 0


# --- strain stiffness -------------------------------------------------------


def test_strain_kernel_constant_and_rotation(setup):
    space = setup(3).dofs.displacement
    K = setup(3).blocks.stiff_s

    def const(x, y, t):
        return np.stack([np.ones_like(x), 2.0 * np.ones_like(y)], axis=-1)

    def rotation(x, y, t):
        return np.stack([-y, x], axis=-1)

    for field in (const, rotation):
        coeffs = interpolate_vector(space, field, 0.0)
        assert np.linalg.norm(K @ coeffs) <= 1e-12


def test_strain_rejects_nonpositive_coefficient(setup):
    with pytest.raises(f.InvalidArgumentError):
        f.assemble_strain_stiffness(setup(2).dofs.velocity, -1.0)


def test_strain_psd(setup, rng):
    K = setup(2).blocks.stiff_f.toarray()
    vals = np.linalg.eigvalsh(K)
    assert vals.min() >= -1e-12


# --- div-div ----------------------------------------------------------------


def test_divdiv_kernel_divergence_free_linear(setup):
    space = setup(3).dofs.displacement
    L = setup(3).blocks.divdiv

    def const(x, y, t):
        return np.stack([np.ones_like(x), np.ones_like(y)], axis=-1)

    def divfree(x, y, t):
        return np.stack([x, -y], axis=-1)

    for field in (const, divfree):
        coeffs = interpolate_vector(space, field, 0.0)
        assert np.linalg.norm(L @ coeffs) <= 1e-12


def test_divdiv_rejects_negative_coefficient(setup):
    with pytest.raises(f.InvalidArgumentError):
        f.assemble_divdiv(setup(2).dofs.displacement, -0.5)


# --- pressure coupling ------------------------------------------------------


def test_pressure_rejects_unsupported_pair(setup):
    s = setup(2)
    with pytest.raises(f.InvalidArgumentError):
        f.assemble_pressure_coupling(s.dofs.pressure, s.dofs.pressure)


def test_pressure_transpose_on_divfree_field(setup):
    s = setup(3)

    def shear(x, y, t):
        return np.stack([y, np.zeros_like(x)], axis=-1)

    coeffs = interpolate_vector(s.dofs.velocity, shear, 0.0)
    assert np.linalg.norm(s.blocks.press.T @ coeffs) <= 1e-13


def test_pressure_constant_column_interior_rows(setup):
    # divergence theorem: for v supported away from the boundary,
    # int(div v) = 0, so the constant-pressure combination vanishes there
    s = setup(4)
    P = s.blocks.press
    row_sums = np.asarray(P.sum(axis=1)).ravel()
    boundary = s.dofs.velocity.dofs_on_tags(
        ("left", "right", "bottom")).tolist()
    interface = np.unique(np.concatenate(
        [d for d, _, _ in s.dofs.velocity.tagged_edges("interface")]
        if False else [np.array([d for dofs, _, _ in
                                 s.dofs.velocity.tagged_edges("interface")
                                 for d in dofs])]))
    constrained = vector_dofs(s.dofs.velocity,
                              np.union1d(boundary, interface))
    mask = np.ones(s.dofs.n_u, dtype=bool)
    mask[constrained] = False
    assert np.max(np.abs(row_sums[mask])) <= 1e-13


# --- interface coupling -----------------------------------------------------


def test_interface_component_block_total(setup):
    # constant multiplier against constant trace integrates the
    # interface length per component
    s = setup(4)
    G = s.blocks.coupling_f
    m = s.dofs.n_gamma // 2
    nvel = s.dofs.velocity.n_dofs
    block = G[:m, :nvel]
    assert abs(block.sum() - 1.0) <= 1e-13
    assert abs(G.sum() - 2.0) <= 1e-13


def test_interface_interior_columns_zero(setup):
    s = setup(3)
    for G, space in ((s.blocks.coupling_f, s.dofs.velocity),
                     (s.blocks.coupling_s, s.dofs.displacement)):
        on_interface = set()
        for dofs, _, _ in space.tagged_edges("interface"):
            on_interface.update(dofs)
        col_norms = np.asarray(abs(G).sum(axis=0)).ravel()
        for j in range(space.n_dofs):
            if j not in on_interface:
                assert col_norms[j] == 0.0
                assert col_norms[j + space.n_dofs] == 0.0


def test_interface_consistency_against_quadrature(setup, rng):
    # s^T G v equals the segment quadrature of <v^h, s^h> on the interface
    s = setup(4)
    G = s.blocks.coupling_f
    space = s.dofs.velocity
    v = rng.standard_normal(s.dofs.n_u)
    lm = rng.standard_normal(s.dofs.n_gamma)
    quad = oracles.dense_interface(space, s.grid)
    assert abs(lm @ (G @ v) - lm @ (quad @ v)) <= 1e-12 * (
        1.0 + abs(lm @ (quad @ v)))


def test_interface_coarsened_grid_entries(setup):
    s = setup(4, k=2)
    dense = oracles.dense_interface(s.dofs.velocity, s.grid)
    assert max_abs(s.blocks.coupling_f.toarray() - dense) <= 1e-13


def test_interface_grid_mismatch_raises():
    mesh_f, mesh_s = f.fluid_mesh(4), f.solid_mesh(4)
    grid = f.build_interface_grid(mesh_f, mesh_s, 1)
    other = ScalarSpace(f.fluid_mesh(3), 2)
    with pytest.raises(f.MeshMismatchError):
        f.assemble_interface_coupling(other, grid)


# --- loads ------------------------------------------------------------------


def test_body_load_zero_function(setup):
    def zero(x, y, t):
        return np.stack([np.zeros_like(x), np.zeros_like(y)], axis=-1)

    vec = f.assemble_body_load(setup(2).dofs.velocity, zero, 0.0)
    assert np.all(vec == 0.0)


def test_body_load_constant_partition_of_unity(setup):
    def unit_x(x, y, t):
        return np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1)

    space = setup(3).dofs.velocity
    vec = f.assemble_body_load(space, unit_x, 0.0)
    assert abs(vec[:space.n_dofs].sum() - 1.0) <= 1e-13
    assert np.max(np.abs(vec[space.n_dofs:])) <= 1e-15


def test_neumann_zero_data(setup):
    def zero(x, y, t):
        return np.stack([np.zeros_like(x), np.zeros_like(y)], axis=-1)

    vec = f.assemble_neumann_load(setup(2).dofs.velocity,
                                  ("left", "right"), zero, 0.0)
    assert np.all(vec == 0.0)


def test_neumann_constant_data_total_length(setup):
    def unit_x(x, y, t):
        return np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1)

    space = setup(3).dofs.velocity
    vec = f.assemble_neumann_load(space, ("left", "right"), unit_x, 0.0)
    assert abs(vec[:space.n_dofs].sum() - 2.0) <= 1e-13


def test_neumann_unknown_tag(setup):
    def zero(x, y, t):
        return np.stack([np.zeros_like(x), np.zeros_like(y)], axis=-1)

    with pytest.raises(f.InvalidArgumentError):
        f.assemble_neumann_load(setup(2).dofs.velocity, ("lid",), zero, 0.0)


def test_neumann_trig_data_matches_oracle(setup):
    # same 3-point Gauss rule on both sides; the oracle evaluates the
    # trace through the owning triangle's 2D basis instead of 1D shapes
    def wavy(x, y, t):
        return np.stack([np.sin(3.0 * y + t), np.cos(2.0 * y - t)], axis=-1)

    space = setup(2).dofs.velocity
    vec = f.assemble_neumann_load(space, ("left", "right"), wavy, 0.3)
    dense = oracles.dense_neumann_load(space, ("left", "right"), wavy, 0.3,
                                       nq=3)
    assert np.max(np.abs(vec - dense)) <= 1e-12


# --- dense element-loop oracle suite (acceptance criterion 7) ---------------


@pytest.mark.parametrize("n", [1, 2])
def test_all_blocks_match_dense_oracle(setup, n):
    s = setup(n)
    vel, pre, dis = s.dofs.velocity, s.dofs.pressure, s.dofs.displacement
    pairs = [
        (s.blocks.mass_f.toarray(), oracles.dense_mass(vel, 1.0)),
        (s.blocks.mass_s.toarray(), oracles.dense_mass(dis, 1.0)),
        (s.blocks.stiff_f.toarray(), oracles.dense_strain(vel, 2.0)),
        (s.blocks.stiff_s.toarray(), oracles.dense_strain(dis, 2.0)),
        (s.blocks.divdiv.toarray(), oracles.dense_divdiv(dis, 1.0)),
        (s.blocks.press.toarray(), oracles.dense_pressure(vel, pre)),
        (s.blocks.coupling_f.toarray(), oracles.dense_interface(vel, s.grid)),
        (s.blocks.coupling_s.toarray(), oracles.dense_interface(dis, s.grid)),
    ]
    for built, dense in pairs:
        assert np.max(np.abs(built - dense)) <= 1e-12


def test_body_load_polynomial_matches_oracle(setup, rng):
    c = rng.standard_normal((2, 6))

    def poly(x, y, t):
        comps = [ci[0] + ci[1] * x + ci[2] * y + ci[3] * x * x
                 + ci[4] * x * y + ci[5] * y * y + t for ci in c]
        return np.stack(comps, axis=-1)

    space = setup(2).dofs.displacement
    vec = f.assemble_body_load(space, poly, 0.7)
    dense = oracles.dense_body_load(space, poly, 0.7)
    assert np.max(np.abs(vec - dense)) <= 1e-12


def test_strain_single_entry_two_triangle_mesh(setup):
    s = setup(1)
    dense = oracles.dense_strain(s.dofs.velocity, 2.0)
    built = s.blocks.stiff_f.toarray()
    assert abs(built[0, 0] - dense[0, 0]) <= 1e-12


# --- symmetry and structure --------------------------------------------------


@pytest.mark.parametrize("name", ["mass_f", "stiff_f", "mass_s", "stiff_s",
                                  "divdiv"])
def test_symmetric_blocks(setup, name):
    block = getattr(setup(4).blocks, name)
    assert sym_defect(block) <= 1e-12


def test_finalized_csr_sorted_dedup(setup):
    for block in (setup(2).blocks.mass_f, setup(2).blocks.press):
        assert block.has_sorted_indices
        coo = block.tocoo()
        keys = set(zip(coo.row.tolist(), coo.col.tolist()))
        assert len(keys) == block.nnz


def test_block_dimensions(setup):
    s = setup(3)
    d = s.dofs
    assert d.n_u == 2 * (2 * 3 + 1) ** 2
    assert s.blocks.mass_f.shape == (d.n_u, d.n_u)
    assert s.blocks.press.shape == (d.n_u, d.n_p)
    assert s.blocks.mass_s.shape == (d.n_eta, d.n_eta)
    assert s.blocks.coupling_f.shape == (d.n_gamma, d.n_u)
    assert s.blocks.coupling_s.shape == (d.n_gamma, d.n_eta)


def test_dirichlet_sets_exclude_interface(setup):
    s = setup(3)
    interface = {d for dofs, _, _ in s.dofs.velocity.tagged_edges("interface")
                 for d in dofs}
    corner_free = interface - set(
        s.dofs.velocity.dofs_on_tags(("left", "right", "bottom")).tolist())
    dirichlet_scalar = set(
        (s.dofs.dirichlet_velocity % s.dofs.velocity.n_dofs).tolist())
    # default layout: only the bottom is Dirichlet for the fluid
    assert dirichlet_scalar == set(
        s.dofs.velocity.dofs_on_tags(("bottom",)).tolist())
    assert not (corner_free & dirichlet_scalar)


# --- Dirichlet elimination ---------------------------------------------------


def test_apply_dirichlet_zero_values_keeps_interior_rhs(setup, rng):
    s = setup(2)
    A = s.blocks.mass_f + s.blocks.stiff_f
    rhs = rng.standard_normal(s.dofs.n_u)
    dofs = s.dofs.dirichlet_velocity
    A2, rhs2 = f.apply_dirichlet(A, rhs.copy(), dofs, np.zeros(len(dofs)))
    mask = np.ones(s.dofs.n_u, dtype=bool)
    mask[dofs] = False
    assert np.allclose(rhs2[mask], rhs[mask])
    assert np.all(rhs2[dofs] == 0.0)
    assert sym_defect(A2) <= 1e-12


def test_apply_dirichlet_reproduces_boundary_values(setup, rng):
    s = setup(2)
    A = s.blocks.mass_s + s.blocks.stiff_s
    dofs = s.dofs.dirichlet_displacement
    values = rng.standard_normal(len(dofs))
    A2, rhs2 = f.apply_dirichlet(A, np.zeros(s.dofs.n_eta), dofs, values)
    x = np.linalg.solve(A2.toarray(), rhs2)
    assert np.max(np.abs(x[dofs] - values)) <= 1e-12


@pytest.mark.parametrize("n", [2, 5])
def test_dirichlet_patch_test_linear_field(n):
    # pure elasticity with a linear exact field: D(u) constant, so zero
    # forcing with the exact trace everywhere must reproduce it exactly
    mesh = f.solid_mesh(n)
    space = ScalarSpace(mesh, 2)
    K = f.assemble_strain_stiffness(space, 2.0)

    def linear(x, y, t):
        return np.stack([0.3 + 1.2 * x - 0.5 * y, -0.7 + 0.4 * x + 2.0 * y],
                        axis=-1)

    exact = interpolate_vector(space, linear, 0.0)
    boundary = space.dofs_on_tags(("left", "right", "top", "interface"))
    dofs = vector_dofs(space, boundary)
    A2, rhs2 = f.apply_dirichlet(K, np.zeros(2 * space.n_dofs), dofs,
                                 exact[dofs])
    x = sp.linalg.spsolve(A2.tocsc(), rhs2)
    assert np.max(np.abs(x - exact)) <= 1e-12


def test_zero_columns_and_lift_slices(setup):
    s = setup(2)
    A = s.blocks.mass_f
    dofs = s.dofs.dirichlet_velocity
    zc = zero_columns(A, dofs)
    assert np.max(np.abs(zc.toarray()[:, dofs])) == 0.0
    cols = matrix_columns(A, dofs)
    assert np.allclose(cols.toarray(), A.toarray()[:, dofs])
