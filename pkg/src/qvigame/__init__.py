"""Two-player zero-sum stochastic differential games with impulse controls.

Solve the double-obstacle HJBI quasi-variational inequality on a grid, read
off both players' intervention strategies, and check the result by Monte
Carlo simulation of the controlled diffusion.
"""

__version__ = "0.1.0"

from .grid import Boundary, CFLError, Grid, GridRequest, build_grid, check_cfl
from .operators import ValueField, apply_local_operator, intervention_inf, intervention_sup
from .policy import PolicyMap, Regime, extract_policy, region_masks
from .problem import (
    AffineCost,
    AffineDrift,
    BumpGain,
    Cone,
    ConstantDiffusion,
    ConstantPayoff,
    DiagonalAffineDiffusion,
    GaussianPayoff,
    HatPayoff,
    Priority,
    ProblemSpec,
    Sampling,
    TrigGain,
    ValidationReport,
    ZeroGain,
    evaluate_coefficients,
    validate_assumptions,
)
from .simulator import SimConfig, SimReport, check_dpp, check_impulse_tail, simulate
from .solver import (
    SolveResult,
    SolverOptions,
    obstacle_fixed_point,
    qvi_residual,
    solve_backward,
    solve_backward_transformed,
)

__all__ = [
    "AffineCost",
    "AffineDrift",
    "Boundary",
    "BumpGain",
    "CFLError",
    "Cone",
    "ConstantDiffusion",
    "ConstantPayoff",
    "DiagonalAffineDiffusion",
    "GaussianPayoff",
    "Grid",
    "GridRequest",
    "HatPayoff",
    "PolicyMap",
    "Priority",
    "ProblemSpec",
    "Regime",
    "Sampling",
    "SimConfig",
    "SimReport",
    "SolveResult",
    "SolverOptions",
    "TrigGain",
    "ValidationReport",
    "ValueField",
    "ZeroGain",
    "apply_local_operator",
    "build_grid",
    "check_cfl",
    "check_dpp",
    "check_impulse_tail",
    "evaluate_coefficients",
    "extract_policy",
    "intervention_inf",
    "intervention_sup",
    "obstacle_fixed_point",
    "qvi_residual",
    "region_masks",
    "simulate",
    "solve_backward",
    "solve_backward_transformed",
    "validate_assumptions",
]
