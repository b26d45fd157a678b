"""Closed-form exact solution on the two unit boxes, the forcing and
boundary data derived from it, and error-norm evaluation.

The displacement's second component as usually quoted
(``cos(x+t)*cos(x+t)``) is inconsistent with velocity continuity on the
interface; the default ``corrected`` variant uses ``cos(x+t)*cos(y+t)``,
the minimal edit under which both interface conditions hold identically.
The inconsistent form stays available as the ``printed`` variant for
comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import collapsed_triangle_rule, quadrature_segment
from .errors import InvalidArgumentError

VARIANTS = ("corrected", "printed")

# fixed outward normals of the two boxes, by side tag
FLUID_NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0),
                 "bottom": (0.0, -1.0)}
SOLID_NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0),
                 "top": (0.0, 1.0)}


@dataclass(frozen=True)
class Constants:
    """Physical constants; the reference experiments set all of them to 1."""

    rho_f: float = 1.0
    rho_s: float = 1.0
    nu_f: float = 1.0
    nu_s: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        for name in ("rho_f", "rho_s", "nu_f", "nu_s"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.lam < 0:
            raise InvalidArgumentError("lam must be nonnegative")


def _stack(cx, cy):
    return np.stack(np.broadcast_arrays(cx, cy), axis=-1)


class ExactSolution:
    """Analytic velocity, pressure, displacement and interface traction.

    All evaluators are vectorized over equally shaped ``x``/``y`` arrays
    with a scalar time ``t``. Vector outputs carry a trailing axis of
    length 2; gradient outputs a trailing (2, 2) with ``[i, j]`` holding
    the j-derivative of component i.
    """

    def __init__(self, constants=None, variant="corrected"):
        if variant not in VARIANTS:
            raise InvalidArgumentError(
                f"variant must be one of {VARIANTS}, got {variant!r}")
        self.constants = constants or Constants()
        self.variant = variant

    # --- primary fields -------------------------------------------------

    def velocity(self, x, y, t):
        s = np.sin(np.asarray(x) + np.asarray(y) + 2.0 * t)
        return _stack(s, -s)

    def velocity_gradient(self, x, y, t):
        c = np.cos(np.asarray(x) + np.asarray(y) + 2.0 * t)
        row1 = _stack(c, c)
        return np.stack([row1, -row1], axis=-2)

    def pressure(self, x, y, t):
        k = self.constants
        x, y = np.asarray(x), np.asarray(y)
        return (-2.0 * k.nu_f * np.cos(x + y + 2.0 * t)
                + 2.0 * k.nu_s * np.cos(x + t) * np.sin(y + t))

    def displacement(self, x, y, t):
        x, y = np.asarray(x), np.asarray(y)
        first = np.sin(x + t) * np.sin(y + t)
        if self.variant == "corrected":
            second = np.cos(x + t) * np.cos(y + t)
        else:
            second = np.cos(x + t) * np.cos(x + t)
        return _stack(first, second)

    def displacement_rate(self, x, y, t):
        x, y = np.asarray(x), np.asarray(y)
        first = np.sin(x + y + 2.0 * t)
        if self.variant == "corrected":
            second = -np.sin(x + y + 2.0 * t)
        else:
            second = -np.sin(2.0 * (x + t))
        return _stack(first, second)

    def displacement_gradient(self, x, y, t):
        x, y = np.asarray(x), np.asarray(y)
        row1 = _stack(np.cos(x + t) * np.sin(y + t),
                      np.sin(x + t) * np.cos(y + t))
        if self.variant == "corrected":
            row2 = _stack(-np.sin(x + t) * np.cos(y + t),
                          -np.cos(x + t) * np.sin(y + t))
        else:
            row2 = _stack(-np.sin(2.0 * (x + t)), np.zeros_like(row1[..., 0]))
        return np.stack([row1, row2], axis=-2)

    def fields(self, x, y, t):
        """(velocity, pressure, displacement) at one space-time point."""
        return (self.velocity(x, y, t), self.pressure(x, y, t),
                self.displacement(x, y, t))

    # --- tractions and the interface multiplier -------------------------

    def fluid_traction(self, x, y, t, normal):
        """(2 nu_f D(u) - p I) . n for a fixed normal."""
        k = self.constants
        x, y = np.asarray(x), np.asarray(y)
        c = np.cos(x + y + 2.0 * t)
        p = self.pressure(x, y, t)
        nx, ny = normal
        return _stack((2.0 * k.nu_f * c - p) * nx,
                      (-2.0 * k.nu_f * c - p) * ny)

    def solid_traction(self, x, y, t, normal):
        """(2 nu_s D(eta) + lam (div eta) I) . n for a fixed normal."""
        k = self.constants
        x, y = np.asarray(x), np.asarray(y)
        nx, ny = normal
        d11 = np.cos(x + t) * np.sin(y + t)
        if self.variant == "corrected":
            # D(eta) is diagonal and eta is divergence free
            return _stack(2.0 * k.nu_s * d11 * nx, -2.0 * k.nu_s * d11 * ny)
        d12 = 0.5 * (np.sin(x + t) * np.cos(y + t)
                     - np.sin(2.0 * (x + t)))
        div = d11
        return _stack((2.0 * k.nu_s * d11 + k.lam * div) * nx
                      + 2.0 * k.nu_s * d12 * ny,
                      2.0 * k.nu_s * d12 * nx + k.lam * div * ny)

    def multiplier(self, x, t):
        """Interface traction (the Lagrange multiplier) on y = 1."""
        x = np.asarray(x)
        return self.fluid_traction(x, np.ones_like(x), t, (0.0, 1.0))

    # --- forcing terms ---------------------------------------------------

    def fluid_forcing(self, x, y, t):
        k = self.constants
        x, y = np.asarray(x), np.asarray(y)
        s = np.sin(x + y + 2.0 * t)
        c = np.cos(x + y + 2.0 * t)
        return _stack(
            2.0 * k.rho_f * c + 4.0 * k.nu_f * s
            - 2.0 * k.nu_s * np.sin(x + t) * np.sin(y + t),
            -2.0 * k.rho_f * c + 2.0 * k.nu_s * np.cos(x + t)
            * np.cos(y + t))

    def solid_forcing(self, x, y, t):
        k = self.constants
        x, y = np.asarray(x), np.asarray(y)
        c = np.cos(x + y + 2.0 * t)
        sxsy = np.sin(x + t) * np.sin(y + t)
        cxcy = np.cos(x + t) * np.cos(y + t)
        if self.variant == "corrected":
            return _stack(2.0 * k.rho_s * c + 2.0 * k.nu_s * sxsy,
                          -2.0 * k.rho_s * c + 2.0 * k.nu_s * cxcy)
        c2x = np.cos(2.0 * (x + t))
        return _stack(
            2.0 * k.rho_s * c + (3.0 * k.nu_s + k.lam) * sxsy,
            -2.0 * k.rho_s * c2x + 2.0 * k.nu_s * c2x
            - (k.nu_s + k.lam) * cxcy)


@dataclass(eq=False)
class ProblemData:
    """Time-dependent data driving one transient run.

    ``fluid_neumann``/``solid_neumann`` map a side tag to the traction
    data on that side (the outward normal is already folded in).
    """

    fluid_forcing: callable
    solid_forcing: callable
    fluid_neumann: dict
    solid_neumann: dict
    velocity_dirichlet: callable
    displacement_dirichlet: callable


def make_problem_data(exact, layout):
    """Forcing, Neumann and Dirichlet data matching an exact solution."""
    fluid_neumann = {
        tag: (lambda x, y, t, n=FLUID_NORMALS[tag]:
              exact.fluid_traction(x, y, t, n))
        for tag in layout.fluid_neumann}
    solid_neumann = {
        tag: (lambda x, y, t, n=SOLID_NORMALS[tag]:
              exact.solid_traction(x, y, t, n))
        for tag in layout.solid_neumann}
    return ProblemData(
        fluid_forcing=exact.fluid_forcing,
        solid_forcing=exact.solid_forcing,
        fluid_neumann=fluid_neumann,
        solid_neumann=solid_neumann,
        velocity_dirichlet=exact.velocity,
        displacement_dirichlet=exact.displacement,
    )


def zero_problem_data(layout):
    """All-zero forcing and boundary data (fixed-point testing)."""

    def zero_vec(x, y, t):
        return _stack(np.zeros_like(np.asarray(x, dtype=float)),
                      np.zeros_like(np.asarray(y, dtype=float)))

    return ProblemData(
        fluid_forcing=zero_vec,
        solid_forcing=zero_vec,
        fluid_neumann={tag: zero_vec for tag in layout.fluid_neumann},
        solid_neumann={tag: zero_vec for tag in layout.solid_neumann},
        velocity_dirichlet=zero_vec,
        displacement_dirichlet=zero_vec,
    )


# --- error norms ---------------------------------------------------------

# Product-Gauss points per axis for error integration. The integrands are
# trigonometric, so a rule beyond the assembly order keeps the quadrature
# error of the measured norms below the discretization error.
ERROR_RULE_POINTS = 6


@dataclass(frozen=True)
class ErrorNorms:
    """Discretization errors of one solution snapshot."""

    eta_l2: float
    eta_h1: float
    u_l2: float
    u_h1: float
    p_l2: float


def _split(space, coeffs):
    n = space.n_dofs
    return coeffs[:n], coeffs[n:]


def vector_error_norms(space, coeffs, value_fn, grad_fn, t, rule=None):
    """L2 error and the symmetric-gradient H1 error of a vector field.

    The H1 norm follows ``||e||^2 = ||e||_0^2 + ||D(e)||_0^2`` with D the
    symmetric gradient, matching how the reference results are reported.
    """
    rule = rule or collapsed_triangle_rule(ERROR_RULE_POINTS)
    vals, _ = space.tabulate(rule)
    grads = space.physical_gradients(rule)
    pts = space.quadrature_points(rule)
    cx, cy = _split(space, coeffs)
    scale = np.einsum("q,e->eq", rule.weights, space.jac_det)

    exact_vals = value_fn(pts[:, :, 0], pts[:, :, 1], t)
    exact_grads = grad_fn(pts[:, :, 0], pts[:, :, 1], t)

    l2_sq = 0.0
    dsym_sq = 0.0
    comps = (cx, cy)
    g_err = np.empty(pts.shape[:2] + (2, 2))
    for r in range(2):
        ch = comps[r][space.cells]
        field = np.einsum("qb,eb->eq", vals, ch)
        l2_sq += np.sum(scale * (field - exact_vals[..., r]) ** 2)
        g_err[..., r, :] = (np.einsum("eqbd,eb->eqd", grads, ch)
                            - exact_grads[..., r, :])
    dsym = 0.5 * (g_err + np.swapaxes(g_err, -1, -2))
    dsym_sq = np.sum(scale * np.sum(dsym ** 2, axis=(-2, -1)))
    return np.sqrt(l2_sq), np.sqrt(l2_sq + dsym_sq)


def scalar_l2_error(space, coeffs, fn, t, rule=None):
    rule = rule or collapsed_triangle_rule(ERROR_RULE_POINTS)
    vals, _ = space.tabulate(rule)
    pts = space.quadrature_points(rule)
    scale = np.einsum("q,e->eq", rule.weights, space.jac_det)
    field = np.einsum("qb,eb->eq", vals, coeffs[space.cells])
    exact = fn(pts[:, :, 0], pts[:, :, 1], t)
    return float(np.sqrt(np.sum(scale * (field - exact) ** 2)))


def compute_error_norms(dofs, u, eta, p, exact, t):
    """Errors of a discrete (velocity, displacement, pressure) triple."""
    u_l2, u_h1 = vector_error_norms(
        dofs.velocity, u, exact.velocity, exact.velocity_gradient, t)
    eta_l2, eta_h1 = vector_error_norms(
        dofs.displacement, eta, exact.displacement,
        exact.displacement_gradient, t)
    p_l2 = scalar_l2_error(dofs.pressure, p, exact.pressure, t)
    return ErrorNorms(eta_l2=float(eta_l2), eta_h1=float(eta_h1),
                      u_l2=float(u_l2), u_h1=float(u_h1), p_l2=p_l2)


def multiplier_l2_error(grid, coeffs, exact, t, order=5):
    """Discrete L2 interface error of the computed multiplier."""
    rule = quadrature_segment(order)
    xi, w = rule.points, rule.weights
    m = len(grid.nodes_x)
    gx, gy = coeffs[:m], coeffs[m:]
    total = 0.0
    for seg in range(grid.n_segments):
        lo, hi = grid.nodes_x[seg], grid.nodes_x[seg + 1]
        xq = lo + xi * (hi - lo)
        hats = np.stack([1.0 - xi, xi], axis=1)
        gh = np.stack([hats @ gx[seg:seg + 2], hats @ gy[seg:seg + 2]],
                      axis=-1)
        ge = exact.multiplier(xq, t)
        total += (hi - lo) * np.sum(w[:, None] * (gh - ge) ** 2)
    return float(np.sqrt(total))


def convergence_rate(errors, params):
    """Observed rates ``log(e_prev/e) / log(h_prev/h)`` between rows.

    A zero error makes the corresponding rate undefined and is reported
    as NaN.
    """
    errors = np.asarray(errors, dtype=float)
    params = np.asarray(params, dtype=float)
    if len(errors) < 2 or len(errors) != len(params):
        raise InvalidArgumentError(
            "need at least two matching error/parameter entries")
    diffs = np.diff(params)
    if not (np.all(diffs < 0) or np.all(diffs > 0)):
        raise InvalidArgumentError("parameter sequence must be monotone")
    rates = np.full(len(errors) - 1, np.nan)
    for i in range(1, len(errors)):
        if errors[i] > 0 and errors[i - 1] > 0:
            rates[i - 1] = (np.log(errors[i - 1] / errors[i])
                            / np.log(params[i - 1] / params[i]))
    return rates
