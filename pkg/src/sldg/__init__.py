"""Semi-Lagrangian discontinuous-Galerkin solvers for linear advection and
advection-diffusion PDEs in one and two dimensions."""

from .field import (BoundaryExtension, DgField1D, Mesh1D, error_vs, eval_field, export_csv,
                    lincomb, norms, project)
from .flow import (BackwardMap, Branch, breakpoints, constant_map, euler_branches,
                   forward_solve, ode_map, perturbed_map, platen_branches, shift_map)
from .quadbasis import GaussRule, gauss_rule, lagrange_basis_at, lagrange_eval
from .transport import AdvectPlan, advect_step, build_advect_plan, direct_step
from .diffusion import (CoeffSet1D, SourceSpec, discount, shift_average, sldg_const,
                        source_correct, weak_step)
from .split2d import (DgField2D, DiffusionDirection, Mesh2D, SplitSchedule, apply_dir,
                      decompose_diffusion, error_vs2, lincomb2, norms2, project2, schedule,
                      split_advect, weak_step_2d)
from .harness import ConvergenceRow, convergence, emit, run
from .problems import EXAMPLES, ExperimentConfig

__version__ = "0.1.0"
