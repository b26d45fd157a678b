import numpy as np
import pytest

import fsischur as f
from fsischur.coupling import zero_state


def make_system(setup, n, dt):
    s = setup(n)
    return s, f.build_fsi_system(s.blocks, dt)


def dense_schur_oracle(system):
    """A W^-1 A^T from dense inverses of the eliminated blocks."""
    af = system.constraint_f.toarray()
    as_ = system.constraint_s.toarray()
    wf = np.linalg.inv(system.fluid_matrix.toarray())
    ws = np.linalg.inv(system.solid_matrix.toarray())
    return af @ wf @ af.T + as_ @ ws @ as_.T


def dense_fluid_schur(system):
    af = system.constraint_f.toarray()
    wf = np.linalg.inv(system.fluid_matrix.toarray())
    return af @ wf @ af.T


def relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# --- system construction -----------------------------------------------------


def test_invalid_time_step(setup):
    with pytest.raises(f.InvalidArgumentError):
        f.build_fsi_system(setup(2).blocks, 0.0)


def test_small_dt_limit(setup):
    s, system = make_system(setup, 2, 1e-12)
    diff = abs(system.fluid_matrix
               - f.assembly.constrain_matrix(
                   s.blocks.mass_f, s.dofs.dirichlet_velocity)).max()
    assert diff <= 1e-11


def test_fluid_matrix_symmetric(setup):
    _, system = make_system(setup, 2, 1e-3)
    assert abs(system.fluid_matrix - system.fluid_matrix.T).max() <= 1e-12


def test_solid_matrix_spd_dense(setup):
    _, system = make_system(setup, 2, 0.1)
    vals = np.linalg.eigvalsh(system.solid_matrix.toarray())
    assert vals.min() > 0.0


def test_constraint_s_pressure_rows_zero(setup):
    s, system = make_system(setup, 2, 1e-3)
    top = system.constraint_s.toarray()[:s.dofs.n_p, :]
    assert np.max(np.abs(top)) == 0.0


# --- Schur operator -----------------------------------------------------------


def test_apply_schur_zero(setup):
    _, system = make_system(setup, 2, 1e-3)
    out = system.apply_schur(np.zeros(system.dim_z))
    assert np.all(out == 0.0)


@pytest.mark.parametrize("n,dt", [(2, 1e-3), (4, 1e-2)])
def test_apply_schur_symmetry_probes(setup, n, dt, rng):
    _, system = make_system(setup, n, dt)
    scale = np.linalg.norm(system.apply_schur(
        np.ones(system.dim_z) / np.sqrt(system.dim_z)))
    for _ in range(10):
        z1 = rng.standard_normal(system.dim_z)
        z2 = rng.standard_normal(system.dim_z)
        gap = abs(z1 @ system.apply_schur(z2)
                  - z2 @ system.apply_schur(z1))
        assert gap <= 1e-10 * np.linalg.norm(z1) * np.linalg.norm(z2) * scale


def test_apply_schur_matches_dense_oracle(setup, rng):
    _, system = make_system(setup, 2, 1e-3)
    dense = dense_schur_oracle(system)
    for _ in range(5):
        z = rng.standard_normal(system.dim_z)
        assert np.linalg.norm(system.apply_schur(z) - dense @ z) <= \
            1e-10 * np.linalg.norm(dense @ z)


def test_schur_positive_definite_probes(setup, rng):
    for n in (2, 4):
        _, system = make_system(setup, n, 1e-3)
        for _ in range(100):
            z = rng.standard_normal(system.dim_z)
            assert z @ system.apply_schur(z) > 0.0


# --- preconditioner ------------------------------------------------------------


def test_preconditioner_zero(setup):
    _, system = make_system(setup, 2, 1e-3)
    assert np.all(system.apply_fluid_preconditioner(
        np.zeros(system.dim_z)) == 0.0)


def test_preconditioner_inverts_fluid_schur(setup, rng):
    _, system = make_system(setup, 2, 1e-3)
    sf = dense_fluid_schur(system)
    for _ in range(5):
        y = rng.standard_normal(system.dim_z)
        x = system.apply_fluid_preconditioner(y)
        assert np.linalg.norm(sf @ x - y) <= 1e-9 * np.linalg.norm(y)


def test_preconditioned_action_matches_dense(setup, rng):
    _, system = make_system(setup, 2, 1e-3)
    dense = np.linalg.solve(dense_fluid_schur(system),
                            dense_schur_oracle(system))
    z = rng.standard_normal(system.dim_z)
    got = system.apply_fluid_preconditioner(system.apply_schur(z))
    assert np.linalg.norm(got - dense @ z) <= 1e-9 * np.linalg.norm(dense @ z)


# --- advance -------------------------------------------------------------------


def test_zero_data_zero_state_stays_zero(setup):
    s, system = make_system(setup, 2, 1e-2)
    data = f.zero_problem_data(s.dofs.layout)
    state = zero_state(s.dofs)
    for _ in range(100):
        state, diag = f.advance(system, state, data)
        assert diag.schur_iterations == 0
    for vec in (state.u, state.eta, state.z):
        assert np.max(np.abs(vec)) <= 1e-14


@pytest.mark.parametrize("solver", ["cg", "pcg", "direct"])
def test_one_step_matches_monolithic(setup, exact, manufactured_data,
                                     solver):
    s, system = make_system(setup, 2, 1e-3)
    state = f.initial_state(s.dofs, exact)
    got, _ = f.advance(system, state, manufactured_data, solver=solver,
                       rel_tol=1e-13)
    want = f.monolithic_solve(system, state, manufactured_data)
    assert relative(got.u, want.u) <= 1e-8
    assert relative(got.eta, want.eta) <= 1e-8
    assert relative(got.p, want.p) <= 1e-8
    assert relative(got.g, want.g) <= 1e-8
    assert got.t == pytest.approx(want.t)


@pytest.mark.parametrize("n", [2, 4])
def test_ten_step_lockstep_equivalence(setup, exact, manufactured_data, n):
    # acceptance criterion 3: all fields agree with the direct monolithic
    # solve at every one of ten steps
    s, system = make_system(setup, n, 1e-3)
    state = f.initial_state(s.dofs, exact)
    for _ in range(10):
        partitioned, _ = f.advance(system, state, manufactured_data,
                                   rel_tol=1e-12)
        monolithic = f.monolithic_solve(system, state, manufactured_data)
        for name in ("u", "eta", "p", "g"):
            assert relative(getattr(partitioned, name),
                            getattr(monolithic, name)) <= 1e-8
        state = partitioned


def test_scaled_and_unscaled_recovery_agree(setup, exact, manufactured_data):
    # the advance solves for dt*(p, g); recovered unscaled values must
    # match the monolithic oracle that never scales (dt large enough that
    # the oracle's own mixed-scale LU stays well conditioned)
    s, system = make_system(setup, 2, 1e-3)
    state = f.initial_state(s.dofs, exact)
    got, _ = f.advance(system, state, manufactured_data, rel_tol=1e-13)
    want = f.monolithic_solve(system, state, manufactured_data)
    assert np.linalg.norm(got.z - want.z) <= 1e-9 * np.linalg.norm(want.z)


def test_constraint_residual_small(setup, exact, manufactured_data):
    s, system = make_system(setup, 4, 1e-3)
    state = f.initial_state(s.dofs, exact)
    state, diag = f.advance(system, state, manufactured_data,
                            rel_tol=1e-12)
    assert diag.constraint_residual <= 1e-9


def test_advance_dirichlet_values_exact(setup, exact, manufactured_data):
    s, system = make_system(setup, 2, 1e-3)
    state = f.initial_state(s.dofs, exact)
    state, _ = f.advance(system, state, manufactured_data)
    dofs = s.dofs.dirichlet_velocity
    space = s.dofs.velocity
    comp = dofs // space.n_dofs
    pts = space.coords[dofs % space.n_dofs]
    vals = exact.velocity(pts[:, 0], pts[:, 1], state.t)
    assert np.max(np.abs(state.u[dofs]
                         - vals[np.arange(len(dofs)), comp])) <= 1e-13


def test_unknown_solver(setup, exact, manufactured_data):
    s, system = make_system(setup, 2, 1e-3)
    state = f.initial_state(s.dofs, exact)
    with pytest.raises(f.InvalidArgumentError):
        f.advance(system, state, manufactured_data, solver="sor")


# --- run_transient --------------------------------------------------------------


def test_single_step_transient_equals_advance(setup, exact,
                                              manufactured_data):
    s, system = make_system(setup, 2, 1e-3)
    state = f.initial_state(s.dofs, exact)
    direct, diag = f.advance(system, state, manufactured_data)
    via_run, diags = f.run_transient(system, state, 1e-3,
                                     manufactured_data)
    assert len(diags) == 1
    assert np.array_equal(direct.u, via_run.u)
    assert np.array_equal(direct.eta, via_run.eta)


def test_transient_zero_data_stays_zero(setup):
    s, system = make_system(setup, 2, 0.05)
    data = f.zero_problem_data(s.dofs.layout)
    state, diags = f.run_transient(system, zero_state(s.dofs), 1.0, data)
    assert len(diags) == 20
    assert np.max(np.abs(state.u)) <= 1e-14


def test_transient_rejects_partial_steps(setup, exact, manufactured_data):
    s, system = make_system(setup, 2, 0.3)
    state = f.initial_state(s.dofs, exact)
    with pytest.raises(f.InvalidArgumentError):
        f.run_transient(system, state, 1.0, manufactured_data)


def test_transient_first_order_in_dt(setup, exact):
    # halving dt roughly halves the displacement error on a fixed mesh
    s = setup(4)
    data = f.make_problem_data(exact, s.dofs.layout)
    errors = []
    for dt in (1 / 8, 1 / 16):
        system = f.build_fsi_system(s.blocks, dt)
        state = f.initial_state(s.dofs, exact)
        state, _ = f.run_transient(system, state, 1.0, data)
        norms = f.compute_error_norms(s.dofs, state.u, state.eta, state.p,
                                      exact, state.t)
        errors.append(norms.eta_l2)
    assert errors[1] < errors[0]
    rate = np.log2(errors[0] / errors[1])
    assert 0.5 < rate < 1.6


def test_interpolant_beats_discrete_solution(setup, exact,
                                             manufactured_data):
    # best-approximation sanity: the interpolant of the exact solution is
    # at least as accurate as the computed one
    from fsischur.assembly import interpolate_vector
    s, system = make_system(setup, 2, 1e-3)
    state = f.initial_state(s.dofs, exact)
    state, _ = f.run_transient(system, state, 1e-2, manufactured_data)
    norms = f.compute_error_norms(s.dofs, state.u, state.eta, state.p,
                                  exact, state.t)
    interp = interpolate_vector(s.dofs.velocity, exact.velocity, state.t)
    inorm = f.compute_error_norms(s.dofs, interp, state.eta, state.p,
                                  exact, state.t)
    assert inorm.u_l2 < norms.u_l2


def test_monolithic_zero_data(setup):
    s, system = make_system(setup, 2, 1e-2)
    data = f.zero_problem_data(s.dofs.layout)
    state = f.monolithic_solve(system, zero_state(s.dofs), data)
    assert np.max(np.abs(state.u)) <= 1e-14
    assert np.max(np.abs(state.eta)) <= 1e-14
    assert np.max(np.abs(state.z)) <= 1e-14
