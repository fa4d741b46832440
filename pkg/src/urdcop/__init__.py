"""Minimax-regret solving of uncertain-reward DCOPs with ICG-Max-Sum."""

from .bench import GenParams, evaluate_average_regret, generate_instance, run_benchmark
from .estimators import CentralizedICG, DSAMinimax, ICGMaxSum, MinimaxOracle, make_solver
from .factor_graph import CyclicGraphError, FactorGraph, build_factor_graph
from .icg import (
    IterationLimitError,
    SolveResult,
    SolverTimeout,
    WitnessPoint,
    icg_maxsum,
    solve_master,
    solve_subproblem,
)
from .io import load_instance, save_instance
from .maxsum import solve_dcop
from .model import Constraint, Instance, InstanceError, validate_instance
from .reference import centralized_icg, dsa_minimax, max_regret_oracle, minimax_oracle

__version__ = "0.1.0"

__all__ = [
    "CentralizedICG",
    "Constraint",
    "CyclicGraphError",
    "DSAMinimax",
    "FactorGraph",
    "GenParams",
    "ICGMaxSum",
    "Instance",
    "InstanceError",
    "IterationLimitError",
    "MinimaxOracle",
    "SolveResult",
    "SolverTimeout",
    "WitnessPoint",
    "build_factor_graph",
    "centralized_icg",
    "dsa_minimax",
    "evaluate_average_regret",
    "generate_instance",
    "icg_maxsum",
    "load_instance",
    "make_solver",
    "max_regret_oracle",
    "minimax_oracle",
    "run_benchmark",
    "save_instance",
    "solve_dcop",
    "solve_master",
    "solve_subproblem",
    "validate_instance",
]
