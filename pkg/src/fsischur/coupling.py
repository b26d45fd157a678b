"""Time-step operators of the coupled system, the matrix-free interface
Schur operator and its fluid-side preconditioner, and the per-step
advance that decouples the two subdomain solves.

Scaled variables are used internally per step: the solid solve produces
``eta/dt`` and the Schur solve produces ``dt * (p, g)``; the stored state
always holds the unscaled fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import (BlockOperatorSet, assemble_body_load,
                       assemble_neumann_load, constrain_matrix,
                       interpolate_vector, matrix_columns, zero_columns)
from .errors import InvalidArgumentError, OperatorSizeError
from .sparse_linalg import (DEFAULT_REL_TOL, LinearOperator, cg, factorize,
                            pcg)

SOLVERS = ("cg", "pcg", "direct")
DENSE_SCHUR_CAP = 4000


@dataclass(eq=False)
class TimeState:
    """Coefficient vectors carried between steps.

    ``eta_prev`` is absent on the initial state, where ``eta_dot0``
    (initial structure velocity) replaces it; ``z`` holds the latest
    recovered, unscaled (pressure, multiplier) vector.
    """

    t: float
    step: int
    u: np.ndarray
    eta: np.ndarray
    eta_prev: np.ndarray | None
    eta_dot0: np.ndarray | None
    z: np.ndarray | None
    n_p: int

    @property
    def p(self):
        return None if self.z is None else self.z[:self.n_p]

    @property
    def g(self):
        return None if self.z is None else self.z[self.n_p:]


@dataclass(eq=False)
class StepDiagnostics:
    step: int
    time: float
    schur_iterations: int
    schur_residual: float
    constraint_residual: float


class FsiSystem:
    """Factorized time-step operators for one (mesh pair, dt).

    Holds ``M_f + dt K_f`` and ``M_s + dt^2 (K_s + L)`` after symmetric
    Dirichlet elimination, their factorizations, and the stacked
    constraint blocks with constrained columns zeroed so eliminated dofs
    never couple to the multiplier. All pieces are time independent and
    reused across every step.
    """

    def __init__(self, blocks: BlockOperatorSet, dt: float):
        if dt <= 0:
            raise InvalidArgumentError(f"time step must be positive, got {dt}")
        dofs = blocks.dofs
        self.blocks = blocks
        self.dofs = dofs
        self.dt = float(dt)
        self.dim_z = dofs.n_p + dofs.n_gamma

        fluid_full = (blocks.mass_f + dt * blocks.stiff_f).tocsr()
        solid_full = (blocks.mass_s
                      + dt * dt * (blocks.stiff_s + blocks.divdiv)).tocsr()
        dir_u = dofs.dirichlet_velocity
        dir_e = dofs.dirichlet_displacement

        self.fluid_matrix = constrain_matrix(fluid_full, dir_u)
        self.solid_matrix = constrain_matrix(solid_full, dir_e)
        self.fluid_fact = factorize(self.fluid_matrix, kind="spd")
        self.solid_fact = factorize(self.solid_matrix, kind="spd")

        zero_p = sp.csr_matrix((dofs.n_p, dofs.n_eta))
        constraint_f_full = sp.vstack(
            [blocks.press.T.tocsr(), blocks.coupling_f], format="csr")
        constraint_s_full = sp.vstack(
            [zero_p, blocks.coupling_s], format="csr")
        self.constraint_f = zero_columns(constraint_f_full, dir_u)
        self.constraint_s = zero_columns(constraint_s_full, dir_e)
        self.constraint_f_t = self.constraint_f.T.tocsr()
        self.constraint_s_t = self.constraint_s.T.tocsr()

        # column slices of the unconstrained operators, used to lift
        # inhomogeneous Dirichlet data into the right-hand sides
        self.fluid_lift = matrix_columns(fluid_full, dir_u)
        self.solid_lift = matrix_columns(solid_full, dir_e)
        self.constraint_f_lift = matrix_columns(constraint_f_full, dir_u)
        self.constraint_s_lift = matrix_columns(constraint_s_full, dir_e)

        self._precond_fact = None
        self._dense_schur = None

    # --- operator actions -------------------------------------------------

    def apply_schur(self, z):
        """Matrix-free action of the interface/pressure Schur operator."""
        z = np.asarray(z, dtype=float)
        out = self.constraint_f @ self.fluid_fact.solve(
            self.constraint_f_t @ z)
        out += self.constraint_s @ self.solid_fact.solve(
            self.constraint_s_t @ z)
        return out

    def schur_operator(self):
        return LinearOperator(self.dim_z, self.apply_schur)

    def _augmented_factorization(self):
        if self._precond_fact is None:
            aug = sp.bmat([[self.fluid_matrix, self.constraint_f_t],
                           [self.constraint_f, None]], format="csc")
            self._precond_fact = factorize(aug, kind="symmetric-indefinite")
        return self._precond_fact

    def apply_fluid_preconditioner(self, y):
        """Action of the inverse fluid-side Schur block.

        Solves the augmented saddle system with right-hand side (0, y);
        the negated second solution block is the preconditioned vector.
        """
        fact = self._augmented_factorization()
        rhs = np.concatenate([np.zeros(self.dofs.n_u), np.asarray(y)])
        return -fact.solve(rhs)[self.dofs.n_u:]

    def preconditioner_operator(self):
        return LinearOperator(self.dim_z, self.apply_fluid_preconditioner)

    def _dense_schur_solve(self, rhs):
        if self._dense_schur is None:
            if self.dim_z > DENSE_SCHUR_CAP:
                raise OperatorSizeError(
                    f"direct Schur solve needs dim <= {DENSE_SCHUR_CAP}, "
                    f"got {self.dim_z}")
            dense = np.empty((self.dim_z, self.dim_z))
            probe = np.zeros(self.dim_z)
            for j in range(self.dim_z):
                probe[j] = 1.0
                dense[:, j] = self.apply_schur(probe)
                probe[j] = 0.0
            self._dense_schur = (scipy.linalg.cho_factor(dense), dense)
        cho, dense = self._dense_schur
        x = scipy.linalg.cho_solve(cho, rhs)
        residual = np.linalg.norm(dense @ x - rhs)
        return x, residual


def build_fsi_system(blocks, dt):
    """Factorize the time-step operators; reusable for every step."""
    return FsiSystem(blocks, dt)


def apply_schur(sys, z):
    return sys.apply_schur(z)


def apply_fluid_preconditioner(sys, y):
    return sys.apply_fluid_preconditioner(y)


def initial_state(dofs, exact, t0=0.0):
    """Interpolate initial velocity, displacement and structure rate."""
    return TimeState(
        t=t0, step=0,
        u=interpolate_vector(dofs.velocity, exact.velocity, t0),
        eta=interpolate_vector(dofs.displacement, exact.displacement, t0),
        eta_prev=None,
        eta_dot0=interpolate_vector(dofs.displacement,
                                    exact.displacement_rate, t0),
        z=None, n_p=dofs.n_p)


def zero_state(dofs, t0=0.0):
    return TimeState(t=t0, step=0,
                     u=np.zeros(dofs.n_u),
                     eta=np.zeros(dofs.n_eta),
                     eta_prev=None,
                     eta_dot0=np.zeros(dofs.n_eta),
                     z=None, n_p=dofs.n_p)


def _dirichlet_values(space, vec_dofs, fn, t):
    n = space.n_dofs
    comp = vec_dofs // n
    pts = space.coords[vec_dofs % n]
    if len(pts) == 0:
        return np.zeros(0)
    vals = np.asarray(fn(pts[:, 0], pts[:, 1], t))
    return vals[np.arange(len(vec_dofs)), comp]


def _step_rhs(sys, state, data, t_new):
    """Eliminated right-hand sides of the two subdomain solves and the
    constraint block at the new time level."""
    blocks, dofs, dt = sys.blocks, sys.dofs, sys.dt

    u_dir = _dirichlet_values(dofs.velocity, dofs.dirichlet_velocity,
                              data.velocity_dirichlet, t_new)
    eta_dir = _dirichlet_values(dofs.displacement,
                                dofs.dirichlet_displacement,
                                data.displacement_dirichlet, t_new)
    eta_scaled_dir = eta_dir / dt

    load_f = assemble_body_load(dofs.velocity, data.fluid_forcing, t_new,
                                blocks.quad_order)
    for tag, fn in data.fluid_neumann.items():
        load_f += assemble_neumann_load(dofs.velocity, (tag,), fn, t_new)
    load_s = assemble_body_load(dofs.displacement, data.solid_forcing, t_new,
                                blocks.quad_order)
    for tag, fn in data.solid_neumann.items():
        load_s += assemble_neumann_load(dofs.displacement, (tag,), fn, t_new)

    fluid_rhs = dt * load_f + blocks.mass_f @ state.u
    if state.eta_prev is None:
        solid_rhs = (dt * load_s + (blocks.mass_s @ state.eta) / dt
                     + blocks.mass_s @ state.eta_dot0)
    else:
        solid_rhs = (dt * load_s + 2.0 / dt * (blocks.mass_s @ state.eta)
                     - (blocks.mass_s @ state.eta_prev) / dt)

    fluid_rhs -= sys.fluid_lift @ u_dir
    fluid_rhs[dofs.dirichlet_velocity] = u_dir
    solid_rhs -= sys.solid_lift @ eta_scaled_dir
    solid_rhs[dofs.dirichlet_displacement] = eta_scaled_dir

    constraint_rhs = np.concatenate(
        [np.zeros(dofs.n_p), (blocks.coupling_s @ state.eta) / dt])
    constraint_rhs += sys.constraint_f_lift @ u_dir
    constraint_rhs -= sys.constraint_s_lift @ eta_scaled_dir
    return fluid_rhs, solid_rhs, constraint_rhs, u_dir, eta_dir


def _solve_schur(sys, rhs, solver, rel_tol, max_iter):
    if solver == "cg":
        res = cg(sys.schur_operator(), rhs, rel_tol, max_iter)
        return res.x, res.iterations, res.residual / max(res.residual_norms[0],
                                                         1e-300)
    if solver == "pcg":
        res = pcg(sys.schur_operator(), sys.preconditioner_operator(), rhs,
                  rel_tol, max_iter)
        return res.x, res.iterations, res.residual / max(res.residual_norms[0],
                                                         1e-300)
    if solver == "direct":
        x, residual = sys._dense_schur_solve(rhs)
        scale = max(np.linalg.norm(rhs), 1e-300)
        return x, 0, residual / scale
    raise InvalidArgumentError(f"solver must be one of {SOLVERS}, "
                               f"got {solver!r}")


def advance(sys, state, data, solver="pcg", rel_tol=DEFAULT_REL_TOL,
            max_iter=None):
    """One step of the partitioned scheme.

    Builds the step right-hand sides, solves the Schur equation for the
    scaled (pressure, multiplier) unknown, then recovers velocity and
    displacement through one factorized solve per subdomain.

    Returns
    -------
    (TimeState, StepDiagnostics)
    """
    dt, dofs = sys.dt, sys.dofs
    t_new = state.t + dt
    fluid_rhs, solid_rhs, constraint_rhs, _, _ = _step_rhs(
        sys, state, data, t_new)

    y_f = sys.fluid_fact.solve(fluid_rhs)
    y_s = sys.solid_fact.solve(solid_rhs)
    schur_rhs = (sys.constraint_s @ y_s - sys.constraint_f @ y_f
                 - constraint_rhs)

    z_scaled, iterations, rel_residual = _solve_schur(
        sys, schur_rhs, solver, rel_tol, max_iter)

    u_new = sys.fluid_fact.solve(fluid_rhs + sys.constraint_f_t @ z_scaled)
    eta_scaled = sys.solid_fact.solve(solid_rhs
                                      - sys.constraint_s_t @ z_scaled)
    eta_new = dt * eta_scaled
    z = z_scaled / dt

    # discrete velocity-continuity constraint, evaluated with the
    # unconstrained coupling blocks
    constraint = (sys.blocks.coupling_s @ eta_new / dt
                  - sys.blocks.coupling_f @ u_new
                  - sys.blocks.coupling_s @ state.eta / dt)
    diag = StepDiagnostics(
        step=state.step + 1, time=t_new,
        schur_iterations=iterations,
        schur_residual=rel_residual,
        constraint_residual=float(np.linalg.norm(constraint)))
    new_state = TimeState(t=t_new, step=state.step + 1, u=u_new, eta=eta_new,
                          eta_prev=state.eta, eta_dot0=None, z=z,
                          n_p=dofs.n_p)
    return new_state, diag


def run_transient(sys, state, T, data, solver="pcg",
                  rel_tol=DEFAULT_REL_TOL, max_iter=None):
    """Advance from the state's time to ``T``; T must be a whole number
    of steps away. Returns the final state and per-step diagnostics."""
    span = T - state.t
    n_steps = int(round(span / sys.dt))
    if n_steps < 1 or abs(n_steps * sys.dt - span) > 1e-9 * max(abs(span), 1.0):
        raise InvalidArgumentError(
            f"final time {T} is not a whole number of steps of {sys.dt} "
            f"from {state.t}")
    diagnostics = []
    for _ in range(n_steps):
        state, diag = advance(sys, state, data, solver=solver,
                              rel_tol=rel_tol, max_iter=max_iter)
        diagnostics.append(diag)
    return state, diagnostics


def _zero_rows(matrix, rows):
    n = matrix.shape[0]
    keep = np.ones(n)
    keep[rows] = 0.0
    return (sp.diags(keep) @ matrix).tocsr()


def monolithic_solve(sys, state, data):
    """One step of the undecomposed block system, solved directly.

    Test oracle for the partitioned path: assembles the full coupled
    matrix in the unscaled variables (u, eta, p, g) with the same
    Dirichlet elimination and solves it sparse-direct.
    """
    blocks, dofs, dt = sys.blocks, sys.dofs, sys.dt
    t_new = state.t + dt
    fluid_rhs, solid_rhs, constraint_rhs, _, _ = _step_rhs(
        sys, state, data, t_new)
    dir_u = dofs.dirichlet_velocity
    dir_e = dofs.dirichlet_displacement

    press_r = _zero_rows(blocks.press, dir_u)
    coup_f = zero_columns(blocks.coupling_f, dir_u)
    coup_s = zero_columns(blocks.coupling_s, dir_e)

    matrix = sp.bmat([
        [sys.fluid_matrix, None, -dt * press_r, -dt * coup_f.T],
        [None, sys.solid_matrix / dt, None, dt * coup_s.T],
        [press_r.T, None, None, None],
        [-coup_f, coup_s / dt, None, None],
    ], format="csc")

    # _step_rhs returns the solid block in the scaled variable eta/dt and
    # the stacked (pressure, multiplier) constraint; reuse its pieces for
    # the unscaled arrangement solved here.
    pressure_rhs = -constraint_rhs[:dofs.n_p]
    lm_rhs = constraint_rhs[dofs.n_p:]
    rhs = np.concatenate([fluid_rhs, solid_rhs, pressure_rhs, lm_rhs])

    solution = factorize(matrix, kind="symmetric-indefinite").solve(rhs)
    n_u, n_eta, n_p = dofs.n_u, dofs.n_eta, dofs.n_p
    u_new = solution[:n_u]
    eta_new = solution[n_u:n_u + n_eta]
    z = solution[n_u + n_eta:]
    return TimeState(t=t_new, step=state.step + 1, u=u_new, eta=eta_new,
                     eta_prev=state.eta, eta_dot0=None, z=z, n_p=n_p)
