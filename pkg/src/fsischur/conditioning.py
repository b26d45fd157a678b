"""Extremal eigenvalue and condition-number estimation for the interface
Schur operator, plain and preconditioned, over mesh and time-step sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .assembly import BoundaryLayout, build_blocks
from .coupling import build_fsi_system, initial_state, run_transient
from .errors import InvalidArgumentError, OperatorSizeError
from .manufactured import Constants, ExactSolution, make_problem_data
from .mesh import build_interface_grid, fluid_mesh, solid_mesh

DEFAULT_DENSE_CAP = 4000
LANCZOS_TOL = 1e-6


@dataclass(frozen=True)
class SpectrumEstimate:
    """Extremal eigenvalues of an SPD operator and their ratio."""

    lam_min: float
    lam_max: float
    method: str
    converged: bool = True
    probes: int = 0

    @property
    def cond(self):
        return self.lam_max / self.lam_min


def densify(op, cap=DEFAULT_DENSE_CAP):
    """Materialize an operator column by column (small-scale oracle)."""
    if op.dim > cap:
        raise OperatorSizeError(
            f"operator dimension {op.dim} exceeds densification cap {cap}")
    dense = np.empty((op.dim, op.dim))
    probe = np.zeros(op.dim)
    for j in range(op.dim):
        probe[j] = 1.0
        dense[:, j] = op(probe)
        probe[j] = 0.0
    return dense


def _lanczos_pair(matvec_op, dim, generalized=None, tol=LANCZOS_TOL):
    """Extremal Ritz values via implicitly restarted Lanczos.

    Deterministic start vector; returns (lam_min, lam_max, converged).
    """
    aop = spla.LinearOperator((dim, dim), matvec=matvec_op)
    v0 = np.full(dim, 1.0 / np.sqrt(dim))
    kwargs = dict(k=1, tol=tol, v0=v0, maxiter=50 * dim,
                  return_eigenvectors=False)
    if generalized is not None:
        m_apply, minv_apply = generalized
        kwargs["M"] = spla.LinearOperator((dim, dim), matvec=m_apply)
        kwargs["Minv"] = spla.LinearOperator((dim, dim), matvec=minv_apply)
    converged = True
    try:
        lam_max = float(spla.eigsh(aop, which="LA", **kwargs)[0])
    except spla.ArpackNoConvergence as exc:
        lam_max = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else np.nan
        converged = False
    try:
        lam_min = float(spla.eigsh(aop, which="SA", **kwargs)[0])
    except spla.ArpackNoConvergence as exc:
        lam_min = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else np.nan
        converged = False
    return lam_min, lam_max, converged


def extremal_eigs(op, mode="auto", cap=DEFAULT_DENSE_CAP, tol=LANCZOS_TOL):
    """Extremal eigenvalues of an SPD operator.

    ``dense`` materializes the operator and solves the full symmetric
    eigenproblem; ``lanczos`` computes extremal Ritz values matrix-free;
    ``auto`` picks dense whenever the dimension fits under ``cap``.
    """
    if mode not in ("dense", "lanczos", "auto"):
        raise InvalidArgumentError(f"unknown eigenvalue mode {mode!r}")
    if mode == "auto":
        mode = "dense" if op.dim <= cap else "lanczos"
    if mode == "dense":
        dense = densify(op, cap)
        vals = scipy.linalg.eigvalsh(0.5 * (dense + dense.T))
        return SpectrumEstimate(lam_min=float(vals[0]),
                                lam_max=float(vals[-1]),
                                method="dense", probes=op.dim)
    lam_min, lam_max, ok = _lanczos_pair(op, op.dim, tol=tol)
    return SpectrumEstimate(lam_min=lam_min, lam_max=lam_max,
                            method="lanczos", converged=ok)


def preconditioned_extremal_eigs(system, mode="auto", cap=DEFAULT_DENSE_CAP,
                                 tol=LANCZOS_TOL):
    """Spectrum of the fluid-preconditioned Schur operator.

    Solves the generalized symmetric problem ``S x = mu S_f x`` so the
    reported numbers correspond to an SPD spectrum.
    """
    if mode not in ("dense", "lanczos", "auto"):
        raise InvalidArgumentError(f"unknown eigenvalue mode {mode!r}")
    dim = system.dim_z
    if mode == "auto":
        mode = "dense" if dim <= cap else "lanczos"
    if mode == "dense":
        s_dense = densify(system.schur_operator(), cap)
        fluid_op = _fluid_schur_operator(system)
        sf_dense = densify(fluid_op, cap)
        vals = scipy.linalg.eigh(0.5 * (s_dense + s_dense.T),
                                 0.5 * (sf_dense + sf_dense.T),
                                 eigvals_only=True)
        return SpectrumEstimate(lam_min=float(vals[0]),
                                lam_max=float(vals[-1]),
                                method="dense", probes=2 * dim)
    lam_min, lam_max, ok = _lanczos_pair(
        system.apply_schur, dim,
        generalized=(_fluid_schur_operator(system),
                     system.apply_fluid_preconditioner),
        tol=tol)
    return SpectrumEstimate(lam_min=lam_min, lam_max=lam_max,
                            method="lanczos", converged=ok)


def _fluid_schur_operator(system):
    from .sparse_linalg import LinearOperator

    def apply_fluid(z):
        return system.constraint_f @ system.fluid_fact.solve(
            system.constraint_f_t @ np.asarray(z, dtype=float))

    return LinearOperator(system.dim_z, apply_fluid)


def fit_growth_exponent(dx_values, kappas):
    """Least-squares exponent of kappa ~ (1/dx)^p."""
    dx = np.asarray(dx_values, dtype=float)
    kap = np.asarray(kappas, dtype=float)
    if len(dx) < 2:
        raise InvalidArgumentError("need at least two points to fit")
    slope = np.polyfit(np.log(1.0 / dx), np.log(kap), 1)[0]
    return float(slope)


@dataclass(frozen=True)
class ConditionRow:
    dx: float
    dt: float
    cond_cg: float
    cond_pcg: float
    iters_cg: int
    iters_pcg: int


@dataclass(frozen=True)
class ConditionReport:
    rows: tuple
    kappa_exponent: float


def _iteration_counts(system, dofs, data, exact, steps, rel_tol):
    counts = {}
    for solver in ("cg", "pcg"):
        state = initial_state(dofs, exact)
        final_t = state.t + steps * system.dt
        _, diags = run_transient(system, state, final_t, data, solver=solver,
                                 rel_tol=rel_tol)
        counts[solver] = max(d.schur_iterations for d in diags)
    return counts["cg"], counts["pcg"]


def condition_report(dx_values, dt_values=(), *, dt_ref=1e-5, dx_ref=1 / 32,
                     constants=None, layout=None, coarsening=1,
                     transient_steps=3, rel_tol=1e-10, quad_order=5,
                     mode="auto", cap=DEFAULT_DENSE_CAP):
    """Condition numbers and iteration counts over mesh and dt sweeps.

    One row per mesh size in ``dx_values`` at the reference time step,
    followed by one row per time step in ``dt_values`` on the reference
    mesh. Iteration counts come from a short transient of the reference
    problem at each configuration; the growth exponent is fitted on the
    mesh sweep.
    """
    constants = constants or Constants()
    layout = layout or BoundaryLayout()
    exact = ExactSolution(constants)
    data = make_problem_data(exact, layout)

    block_cache = {}

    def blocks_for(n):
        if n not in block_cache:
            mf, ms = fluid_mesh(n), solid_mesh(n)
            grid = build_interface_grid(mf, ms, coarsening)
            block_cache[n] = build_blocks(
                mf, ms, grid, rho_f=constants.rho_f, rho_s=constants.rho_s,
                nu_f=constants.nu_f, nu_s=constants.nu_s, lam=constants.lam,
                layout=layout, quad_order=quad_order)
        return block_cache[n]

    def one_row(dx, dt):
        n = int(round(1.0 / dx))
        blocks = blocks_for(n)
        system = build_fsi_system(blocks, dt)
        plain = extremal_eigs(system.schur_operator(), mode=mode, cap=cap)
        precond = preconditioned_extremal_eigs(system, mode=mode, cap=cap)
        iters_cg, iters_pcg = _iteration_counts(
            system, blocks.dofs, data, exact, transient_steps, rel_tol)
        return ConditionRow(dx=dx, dt=dt, cond_cg=plain.cond,
                            cond_pcg=precond.cond, iters_cg=iters_cg,
                            iters_pcg=iters_pcg)

    rows = [one_row(dx, dt_ref) for dx in dx_values]
    exponent = (fit_growth_exponent([r.dx for r in rows],
                                    [r.cond_cg for r in rows])
                if len(rows) >= 2 else np.nan)
    rows += [one_row(dx_ref, dt) for dt in dt_values]
    return ConditionReport(rows=tuple(rows), kappa_exponent=exponent)
