"""Study orchestration: flat key-value configuration, the four study
kinds (space/time convergence, conditioning, single run), and CSV
emission with a re-parseable config echo.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import conditioning as cond
from .assembly import BoundaryLayout, build_blocks
from .coupling import build_fsi_system, initial_state, run_transient
from .errors import ConfigError, FsiError
from .manufactured import (Constants, ExactSolution, compute_error_norms,
                           convergence_rate, make_problem_data,
                           multiplier_l2_error)
from .mesh import build_interface_grid, fluid_mesh, solid_mesh

STUDIES = ("space", "time", "conditioning", "single")

TABLE_DX = [1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32]
TABLE_DT = [1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128]

# key -> (type token, global default); None defaults are study dependent
_SCHEMA = {
    "study": ("str", "single"),
    "dx_list": ("float_list", None),
    "dx": ("float", 1 / 32),
    "dt_list": ("float_list", None),
    "dt": ("float", 1e-5),
    "T": ("float", None),
    "rho_f": ("float", 1.0),
    "rho_s": ("float", 1.0),
    "nu_f": ("float", 1.0),
    "nu_s": ("float", 1.0),
    "lambda": ("float", 1.0),
    "coarsening": ("int", 1),
    "solver": ("str", "pcg"),
    "rel_tol": ("float", 1e-10),
    "max_iter": ("int", 0),
    "fluid_neumann": ("str_list", ["left", "right"]),
    "solid_neumann": ("str_list", []),
    "exact_variant": ("str", "corrected"),
    "quad_order": ("int", 5),
    "cond_steps": ("int", 3),
    "dense_cap": ("int", 4000),
    "eig_mode": ("str", "auto"),
    "out": ("str", ""),
}

_STUDY_DEFAULTS = {
    "space": {"dx_list": TABLE_DX, "dt": 1e-5, "T": 1e-3},
    "time": {"dt_list": TABLE_DT, "dx": 1 / 32, "T": 1.0},
    "conditioning": {"dx_list": TABLE_DX, "dt_list": TABLE_DT,
                     "dx": 1 / 32, "dt": 1e-5, "T": 0.0},
    "single": {"T": 1e-3},
}


@dataclass
class StudyConfig:
    """Validated experiment definition. Built by ``parse_config``."""

    study: str
    dx_list: list
    dx: float
    dt_list: list
    dt: float
    T: float
    rho_f: float
    rho_s: float
    nu_f: float
    nu_s: float
    lam: float
    coarsening: int
    solver: str
    rel_tol: float
    max_iter: int
    fluid_neumann: list
    solid_neumann: list
    exact_variant: str
    quad_order: int
    cond_steps: int
    dense_cap: int
    eig_mode: str
    out: str

    def constants(self):
        return Constants(rho_f=self.rho_f, rho_s=self.rho_s, nu_f=self.nu_f,
                         nu_s=self.nu_s, lam=self.lam)

    def layout(self):
        return BoundaryLayout(fluid_neumann=tuple(self.fluid_neumann),
                              solid_neumann=tuple(self.solid_neumann))

    def echo(self):
        """Key-value mapping that fully determines the run."""
        keys = sorted(_SCHEMA)
        values = {k: getattr(self, "lam" if k == "lambda" else k)
                  for k in keys}
        return values


def _coerce(key, kind, raw):
    try:
        if kind == "str":
            return str(raw)
        if kind == "float":
            if isinstance(raw, bool) or isinstance(raw, (list, dict, str)):
                raise TypeError
            return float(raw)
        if kind == "int":
            if isinstance(raw, bool) or not isinstance(raw, (int,)):
                raise TypeError
            return int(raw)
        if kind == "float_list":
            return [float(v) for v in raw]
        if kind == "str_list":
            return [str(v) for v in raw]
    except (TypeError, ValueError):
        pass
    raise ConfigError(key, f"expected {kind}, got {raw!r}")


def _mesh_n(key, dx):
    n = round(1.0 / dx)
    if n < 1 or abs(1.0 / dx - n) > 1e-9:
        raise ConfigError(key, f"mesh size {dx} is not 1/n for integer n")
    return int(n)


def _check_steps(key, T, dt):
    n = round(T / dt)
    if n < 1 or abs(T / dt - n) > 1e-9:
        raise ConfigError(key, f"T={T} is not a whole number of steps "
                                f"of dt={dt}")


def parse_config(text, study=None):
    """Parse a flat key-value study definition.

    One ``key = value`` pair per line; values are JSON scalars or lists,
    plus bare strings. ``#`` starts a comment. Unknown keys, type
    mismatches and invariant violations raise ConfigError with the key.
    An empty document yields all defaults.
    """
    raw = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {ln}", f"expected 'key = value', "
                                            f"got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "duplicate key")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        raw[key] = _coerce(key, _SCHEMA[key][0], parsed)

    if study is not None:
        raw["study"] = study
    kind = raw.get("study", _SCHEMA["study"][1])
    if kind not in STUDIES:
        raise ConfigError("study", f"must be one of {STUDIES}, got {kind!r}")

    values = {}
    for key, (_, default) in _SCHEMA.items():
        if key in raw:
            values[key] = raw[key]
        else:
            values[key] = _STUDY_DEFAULTS[kind].get(key, default)
    values["study"] = kind
    values["lam"] = values.pop("lambda")
    config = StudyConfig(**values)
    _validate(config, set(raw))
    return config


def _validate(config, given):
    for name in ("rho_f", "rho_s", "nu_f", "nu_s"):
        if getattr(config, name) <= 0:
            raise ConfigError(name, "must be positive")
    if config.lam < 0:
        raise ConfigError("lambda", "must be nonnegative")
    if config.coarsening < 1:
        raise ConfigError("coarsening", "must be a positive integer")
    if config.solver not in ("cg", "pcg", "direct"):
        raise ConfigError("solver", f"unknown solver {config.solver!r}")
    if config.exact_variant not in ("corrected", "printed"):
        raise ConfigError("exact_variant",
                          f"unknown variant {config.exact_variant!r}")
    if config.eig_mode not in ("auto", "dense", "lanczos"):
        raise ConfigError("eig_mode", f"unknown mode {config.eig_mode!r}")
    if config.rel_tol <= 0:
        raise ConfigError("rel_tol", "must be positive")
    if config.quad_order < 1:
        raise ConfigError("quad_order", "must be >= 1")
    if config.dt <= 0:
        raise ConfigError("dt", "must be positive")
    try:
        config.layout()
    except FsiError as exc:
        key = "fluid_neumann" if "fluid" in str(exc) else "solid_neumann"
        raise ConfigError(key, str(exc)) from exc

    study = config.study
    if study == "space":
        if not config.dx_list:
            raise ConfigError("dx_list", "space study needs mesh sizes")
        for dx in config.dx_list:
            _mesh_n("dx_list", dx)
        _check_steps("dt", config.T, config.dt)
    elif study == "time":
        if not config.dt_list:
            raise ConfigError("dt_list", "time study needs time steps")
        _mesh_n("dx", config.dx)
        for dt in config.dt_list:
            _check_steps("dt_list", config.T, dt)
    elif study == "conditioning":
        if not config.dx_list:
            raise ConfigError("dx_list", "conditioning study needs "
                                         "mesh sizes")
        for dx in config.dx_list:
            _mesh_n("dx_list", dx)
        for dt in config.dt_list or []:
            if dt <= 0:
                raise ConfigError("dt_list", "time steps must be positive")
        _mesh_n("dx", config.dx)
    else:
        _mesh_n("dx", config.dx)
        _check_steps("dt", config.T, config.dt)


@dataclass
class StudyReport:
    """Tabular study result plus the config echo that reproduces it.

    ``timings`` stays out of the CSV so reruns of one config are
    byte-identical.
    """

    columns: list
    rows: list
    metadata: dict
    timings: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key} = {json.dumps(self.metadata[key])}\n")
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_format_cell(v) for v in row) + "\n")

    def column(self, name):
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def _format_cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "nan" if math.isnan(v) else f"{v:.12e}"


def load_report(path):
    """Read back a study CSV written by StudyReport.to_csv."""
    metadata, columns, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                metadata[key.strip()] = json.loads(value.strip())
            elif columns is None:
                columns = line.split(",")
            else:
                row = []
                for cell in line.split(","):
                    try:
                        row.append(float(cell))
                    except ValueError:
                        row.append(cell)
                rows.append(row)
    return StudyReport(columns=columns or [], rows=rows, metadata=metadata)


def _build_blocks(config, n):
    mesh_f, mesh_s = fluid_mesh(n), solid_mesh(n)
    grid = build_interface_grid(mesh_f, mesh_s, config.coarsening)
    k = config.constants()
    return build_blocks(mesh_f, mesh_s, grid, rho_f=k.rho_f, rho_s=k.rho_s,
                        nu_f=k.nu_f, nu_s=k.nu_s, lam=k.lam,
                        layout=config.layout(), quad_order=config.quad_order)


def _transient_errors(config, blocks, dt):
    """Full run to T on prebuilt blocks; returns errors and iterations."""
    system = build_fsi_system(blocks, dt)
    exact = ExactSolution(config.constants(), config.exact_variant)
    data = make_problem_data(exact, config.layout())
    state = initial_state(blocks.dofs, exact)
    max_iter = config.max_iter or None
    state, diags = run_transient(system, state, config.T, data,
                                 solver=config.solver,
                                 rel_tol=config.rel_tol, max_iter=max_iter)
    norms = compute_error_norms(blocks.dofs, state.u, state.eta, state.p,
                                exact, state.t)
    g_err = multiplier_l2_error(blocks.dofs.grid, state.g, exact, state.t)
    iters = max(d.schur_iterations for d in diags)
    return norms, g_err, iters, diags


_ERROR_FIELDS = ("eta_l2", "eta_h1", "u_l2", "u_h1", "p_l2", "g_l2")


def _convergence_study(config, parameter_name, parameter_values, runner):
    """Shared space/time driver: one transient per row, rates between
    consecutive rows, failures flagged without aborting the sweep."""
    t0 = time.perf_counter()
    raw_rows = []
    for value in parameter_values:
        try:
            norms, g_err, iters, _ = runner(value)
            errors = [norms.eta_l2, norms.eta_h1, norms.u_l2, norms.u_h1,
                      norms.p_l2, g_err]
            raw_rows.append((value, errors, iters, "ok"))
        except FsiError as exc:
            raw_rows.append((value, [math.nan] * len(_ERROR_FIELDS), -1,
                             f"failed:{type(exc).__name__}"))

    columns = [parameter_name]
    for name in _ERROR_FIELDS:
        columns += [name, f"rate_{name}"]
    columns += ["iters", "status"]

    params = [r[0] for r in raw_rows]
    rates = {}
    for j, name in enumerate(_ERROR_FIELDS):
        series = [r[1][j] for r in raw_rows]
        rates[name] = ([math.nan]
                       + list(convergence_rate(series, params))
                       if len(series) >= 2 else [math.nan] * len(series))

    rows = []
    for i, (value, errors, iters, status) in enumerate(raw_rows):
        row = [value]
        for j, name in enumerate(_ERROR_FIELDS):
            row += [errors[j], rates[name][i]]
        row += [iters, status]
        rows.append(row)

    metadata = {f"config.{k}": v for k, v in config.echo().items()}
    report = StudyReport(columns=columns, rows=rows, metadata=metadata)
    report.timings["elapsed"] = time.perf_counter() - t0
    return report


def run_space_study(config):
    """Transient per mesh size at fixed dt; errors at T and their rates."""

    def runner(dx):
        blocks = _build_blocks(config, _mesh_n("dx_list", dx))
        return _transient_errors(config, blocks, config.dt)

    return _convergence_study(config, "dx", list(config.dx_list), runner)


def run_time_study(config):
    """Transient per time step on one mesh; errors at T and their rates."""
    blocks = _build_blocks(config, _mesh_n("dx", config.dx))

    def runner(dt):
        _check_steps("dt_list", config.T, dt)
        return _transient_errors(config, blocks, dt)

    return _convergence_study(config, "dt", list(config.dt_list), runner)


def run_conditioning_study(config):
    """Condition numbers and iteration counts over the configured sweeps."""
    t0 = time.perf_counter()
    report = cond.condition_report(
        config.dx_list, config.dt_list or (), dt_ref=config.dt,
        dx_ref=config.dx, constants=config.constants(),
        layout=config.layout(), coarsening=config.coarsening,
        transient_steps=config.cond_steps, rel_tol=config.rel_tol,
        quad_order=config.quad_order, mode=config.eig_mode,
        cap=config.dense_cap)
    columns = ["dx", "dt", "cond_cg", "cond_pcg", "iters_cg", "iters_pcg"]
    rows = [[r.dx, r.dt, r.cond_cg, r.cond_pcg, r.iters_cg, r.iters_pcg]
            for r in report.rows]
    metadata = {f"config.{k}": v for k, v in config.echo().items()}
    metadata["kappa_exponent"] = report.kappa_exponent
    out = StudyReport(columns=columns, rows=rows, metadata=metadata)
    out.timings["elapsed"] = time.perf_counter() - t0
    return out


def run_single(config):
    """One transient run; per-step diagnostics plus final errors."""
    t0 = time.perf_counter()
    blocks = _build_blocks(config, _mesh_n("dx", config.dx))
    norms, g_err, _, diags = _transient_errors(config, blocks, config.dt)
    columns = ["step", "time", "schur_iterations", "schur_residual",
               "constraint_residual"]
    rows = [[d.step, d.time, d.schur_iterations, d.schur_residual,
             d.constraint_residual] for d in diags]
    metadata = {f"config.{k}": v for k, v in config.echo().items()}
    for name, value in zip(_ERROR_FIELDS,
                           [norms.eta_l2, norms.eta_h1, norms.u_l2,
                            norms.u_h1, norms.p_l2, g_err]):
        metadata[f"final.{name}"] = value
    report = StudyReport(columns=columns, rows=rows, metadata=metadata)
    report.timings["elapsed"] = time.perf_counter() - t0
    return report


RUNNERS = {
    "space": run_space_study,
    "time": run_time_study,
    "conditioning": run_conditioning_study,
    "single": run_single,
}


def run_study(config):
    return RUNNERS[config.study](config)
