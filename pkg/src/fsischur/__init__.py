"""Non-iterative strongly coupled partitioned solver for a linear
fluid-structure interaction problem.

The monolithic system couples Stokes flow with a linear elastic solid
through an interface Lagrange multiplier; each time step reduces to one
solve of an interface/pressure Schur complement equation followed by
independent subdomain solves. The package includes the manufactured
verification problem and empirical condition-number analysis.
"""

from .assembly import (BlockOperatorSet, BoundaryLayout, DofMap, ScalarSpace,
                       apply_dirichlet, assemble_body_load,
                       assemble_divdiv, assemble_interface_coupling,
                       assemble_mass, assemble_neumann_load,
                       assemble_pressure_coupling, assemble_strain_stiffness,
                       build_blocks, build_dof_map)
from .conditioning import (ConditionReport, SpectrumEstimate,
                           condition_report, densify, extremal_eigs,
                           preconditioned_extremal_eigs)
from .coupling import (FsiSystem, StepDiagnostics, TimeState, advance,
                       apply_fluid_preconditioner, apply_schur,
                       build_fsi_system, initial_state, monolithic_solve,
                       run_transient, zero_state)
from .elements import (QuadratureRule, ReferenceElement, map_to_physical,
                       quadrature_segment, quadrature_triangle,
                       reference_basis)
from .errors import (ConfigError, FsiError, InvalidArgumentError,
                     MeshMismatchError, NoConvergenceError,
                     OperatorSizeError, SingularMapError,
                     SingularMatrixError)
from .harness import (StudyConfig, StudyReport, load_report, parse_config,
                      run_conditioning_study, run_single, run_space_study,
                      run_study, run_time_study)
from .manufactured import (Constants, ErrorNorms, ExactSolution, ProblemData,
                           compute_error_norms, convergence_rate,
                           make_problem_data, multiplier_l2_error,
                           zero_problem_data)
from .mesh import (InterfaceGrid, TriangleMesh, build_interface_grid,
                   build_structured_mesh, export_mesh, fluid_mesh,
                   solid_mesh)
from .sparse_linalg import (Factorization, KrylovResult, LinearOperator, cg,
                            factorize, pcg)

__version__ = "0.1.0"
