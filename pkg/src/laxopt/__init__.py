"""Finite-horizon optimal control through convexified velocity programs.

The pipeline: describe a problem (`model`), evaluate the convex conjugate of
its Hamiltonian over reachable-velocity hulls (`conjugate`), solve the
relaxed trajectory program (`lax` on top of `convexsolver`), then reconstruct
admissible near-optimal controllers over a finite control net (`net`,
`synth`) and judge them by simulation (`sim`). The `cli` module wires these
into the `laxopt` command.
"""

from .model import (Box, BoxConstraint, CostSpec, FiniteSet,
                    HalfspaceConstraint, Problem, ProductSet, QuadraticCost,
                    StructuredDynamics, TimeGrid, ValidationReport,
                    gear_preset, validate)
from .conjugate import (BiconjugateTable, ConjugateValue, HullModel,
                        biconjugate, control_image_hull, hamiltonian,
                        hstar, hstar_structured, hull_distance,
                        reduced_lagrangian, sample_hull)
from .convexsolver import SolveReport, SolverOptions, SparseConvexProgram
from .lax import (AssembledLax, InfeasibleProblem, LaxSolution, MODES,
                  UnsupportedCost, assemble, load_solution, penalty_sweep,
                  relaxed_cost, save_solution, solve_lax)
from .net import (DeltaNet, NetBuildError, NetVerifyReport, build as build_net,
                  load_net, save_net, uniform_net, verify as verify_net)
from .sim import (ControlTrajectory, MetricSet, control_variation,
                  evaluate_cost, integrate, load_control, load_trajectory,
                  metrics, save_control, save_trajectory)
from .synth import (SynthesisResult, UncoveredPoint, baseline_interpolation,
                    dominant_generator, nearest_vertex, simple_function,
                    synthesize)
from .config import ConfigError, load_problem, preset_problem

__version__ = "0.1.0"

__all__ = [
    "Box", "BoxConstraint", "CostSpec", "FiniteSet", "HalfspaceConstraint",
    "Problem", "ProductSet", "QuadraticCost", "StructuredDynamics",
    "TimeGrid", "ValidationReport", "gear_preset", "validate",
    "BiconjugateTable", "ConjugateValue", "HullModel", "biconjugate",
    "control_image_hull", "hamiltonian", "hstar", "hstar_structured",
    "hull_distance", "reduced_lagrangian", "sample_hull",
    "SolveReport", "SolverOptions", "SparseConvexProgram",
    "AssembledLax", "InfeasibleProblem", "LaxSolution", "MODES",
    "UnsupportedCost", "assemble", "load_solution", "penalty_sweep",
    "relaxed_cost", "save_solution", "solve_lax",
    "DeltaNet", "NetBuildError", "NetVerifyReport", "build_net", "load_net",
    "save_net", "uniform_net", "verify_net",
    "ControlTrajectory", "MetricSet", "control_variation", "evaluate_cost",
    "integrate", "load_control", "load_trajectory", "metrics",
    "save_control", "save_trajectory",
    "SynthesisResult", "UncoveredPoint", "baseline_interpolation",
    "dominant_generator", "nearest_vertex", "simple_function", "synthesize",
    "ConfigError", "load_problem", "preset_problem",
    "__version__",
]
