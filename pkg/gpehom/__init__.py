"""
gpe-homotopy: many eigenpairs of the discrete Gross-Pitaevskii eigenproblem

Randomized homotopies from a linear eigenproblem to the nonlinear one, traced
with a predictor-corrector method, plus independent verification oracles.
"""

__version__ = "0.1.0"

# Public API re-exports from subpackages
from .core.models import ProblemSpec, TraceConfig, RunConfig, RunReport
from .core.config import GpehomSettings, load_run_config, parse_run_config, format_run_config
from .core.engine import GPEHomotopyEngine
from .numerics.discretize import Grid, SymBandMatrix, build_grid, build_operator
from .numerics.homotopy import HomotopyProblem, State, build_problem, initial_states
from .numerics.tracer import PathResult, trace_all, trace_path
from .numerics.verify import Eigenpair, scf_ground_state
from .adapters.base import ExecutionResult, BaseResultStore
