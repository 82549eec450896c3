"""Finite-horizon stochastic linear-quadratic control with Poisson jumps.

Solver and verifier for the closed-loop optimal control of linear
jump-diffusion dynamics under quadratic cost: a backward Riccati sweep with
solvability gates, feedback/feedforward synthesis, value evaluation, and a
Monte Carlo verification suite built on reproducible counter-based noise.
"""

from .errors import (ClosedLoopUnsolvable, NumericalFailure, OutOfHorizon,
                     ProblemFormatError, ProblemValidationError, RegularityViolation)
from .feedforward import (AdjointSolution, ClosedLoopStrategy, closed_loop_strategy,
                          feedforward_offsets, solve_adjoint, value_at, value_terms)
from .linalg import is_psd, pinv, pinv_quadform, range_contains, symmetrize
from .noise import NoisePlan, poisson_icdf
from .problem import (CoefficientPath, ProblemSpec, TimeGrid, ValidatedProblem,
                      homogeneous_part, load_problem, problem_from_dict, problem_to_dict,
                      save_problem, validate, validation_errors, with_steps)
from .riccati import (GainOperators, RiccatiSolution, feedback_gains, gain_operators,
                      riccati_derivative, solve_lyapunov, solve_riccati)
from .simulate import (SimBatch, Trajectory, euler_step, simulate_closed_loop,
                       simulate_open_loop)
from .verify import (CostReport, IdentityReport, Probe, completion_of_squares_check,
                     convexity_probe, cost_along, equivalence_check, mc_cost, path_costs,
                     run_verification, stationarity_residual)

__version__ = "0.1.0"

__all__ = [
    "AdjointSolution", "ClosedLoopStrategy", "ClosedLoopUnsolvable", "CoefficientPath",
    "CostReport", "GainOperators", "IdentityReport", "NoisePlan", "NumericalFailure",
    "OutOfHorizon", "Probe", "ProblemFormatError", "ProblemSpec", "ProblemValidationError",
    "RegularityViolation", "RiccatiSolution", "SimBatch", "TimeGrid", "Trajectory",
    "ValidatedProblem", "closed_loop_strategy", "completion_of_squares_check",
    "convexity_probe", "cost_along", "equivalence_check", "euler_step", "feedback_gains",
    "feedforward_offsets", "gain_operators", "homogeneous_part", "is_psd", "load_problem",
    "mc_cost", "path_costs", "pinv", "pinv_quadform", "poisson_icdf", "problem_from_dict",
    "problem_to_dict", "range_contains", "riccati_derivative", "run_verification",
    "save_problem", "simulate_closed_loop", "simulate_open_loop", "solve_adjoint",
    "solve_lyapunov", "solve_riccati", "stationarity_residual", "symmetrize", "validate",
    "validation_errors", "value_at", "value_terms", "with_steps",
]
