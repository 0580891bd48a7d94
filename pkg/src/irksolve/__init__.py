"""Transformed implicit Runge-Kutta solver stack with block ILU(0)
preconditioners and a reproducible experiment harness."""

from .blocks import (BlockDiagonalMatrix, BlockSparseMatrix, OpCounter,
                     dump_matrix, load_matrix)
from .dg1d import Dg1dConfig, Dg1dGrid
from .krylov import GmresConfig, GmresStats, equivalent_multiplications, gmres
from .meshing import ElementGraph, build_line_mesh, partition, single_element_graph
from .precond import (BlockIlu0, SingularPivotError, StageCoupledIlu0,
                      StageUncoupledIlu0, build_stage_matrix, ilu0_factorize,
                      partition_keep_mask, stage_coupled_factorize,
                      stage_uncoupled_factorize)
from .problems import (SemidiscreteProblem, fd_jacobian,
                       make_advection_diffusion_dg, make_linear_block_ode,
                       make_prothero_robinson, make_viscous_burgers_mms)
from .stage_system import StageOperator, UntransformedOperator, k_to_w, w_to_k
from .stepper import (IntegrateResult, NewtonConfig, NewtonError, PrecondSpec,
                      StepResult, dirk_step, integrate, irk_step_transformed,
                      irk_step_untransformed)
from .studies import (ConvergenceRow, ConvergenceStudy, CostRow, StudyRecord,
                      cost_report, rate, run_convergence_study,
                      run_partition_study, run_precond_study)
from .tableaux import (ButcherTableau, SchemeKind, TableauDerived,
                       builtin_tableau, check_order_conditions, derive,
                       generate_radau_iia, stability_function)

__version__ = "0.1.0"
