"""Collision-aware frequency allocation for fixed-frequency transmon lattices."""

from .architecture import Architecture
from .constraints import (
    CollisionReport,
    ConstraintInstance,
    FrequencyAssignment,
    ThresholdTable,
    evaluate,
    instantiate_constraints,
    is_zero_collision,
)
from .graph import DeviceGraph, GraphError, LatticeSpec, build_lattice
from .solver import SolveConfig, SolveResult, anneal_fallback, solve, solve_step1, solve_step2, solve_step3
from .yields import (
    DispersionModel,
    YieldEstimate,
    dispersion_for_target_yield,
    estimate,
    estimate_yield,
    estimate_yield_cz,
    scale_yield,
    yield_sweep,
)

__all__ = [
    "Architecture",
    "CollisionReport",
    "ConstraintInstance",
    "DeviceGraph",
    "DispersionModel",
    "FrequencyAssignment",
    "GraphError",
    "LatticeSpec",
    "SolveConfig",
    "SolveResult",
    "ThresholdTable",
    "YieldEstimate",
    "anneal_fallback",
    "build_lattice",
    "dispersion_for_target_yield",
    "estimate",
    "estimate_yield",
    "estimate_yield_cz",
    "evaluate",
    "instantiate_constraints",
    "is_zero_collision",
    "scale_yield",
    "solve",
    "solve_step1",
    "solve_step2",
    "solve_step3",
    "yield_sweep",
]
