"""Parallel-in-time integration of linear ODEs with the ParaExp method."""
from .expm import (ExpmConfig, ExpmMode, expm_action, expm_action_taylor, expm_dense,
                   select_taylor_params)
from .linode import (LinearOdeSystem, NumericalError, SampledSolution, SparseMatrix,
                     sample_grid, spmv, weighted_norms)
from .solver import (ParaexpRun, TimePartition, WorkerError, paraexp_solve,
                     partition_uniform, propagate_homogeneous, solve_particular, superpose)
from .steppers import (CflWarning, StepperKind, cfl_number, integrate, leapfrog_step,
                       rk4_step)

__version__ = "0.1.0"
