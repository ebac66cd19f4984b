"""Methane transport with hydrate formation in one space dimension.

The total methane content ``u`` and dissolved fraction ``chi`` are linked by
a maximal monotone phase graph; transport is an advection-diffusion-reaction
operator; time stepping is backward Euler with a nonlinear stationary solve
per step.  Darcy coupling and a closed-form advection oracle complete the set.
"""

from .coupled import CoupledProblem, CoupledState, run_coupled
from .discrete_operator import (
    DiscreteOperator,
    Grid,
    OperatorCoefficients,
    OperatorError,
    apply,
    assemble_operator,
    resolvent_solve,
)
from .evolution import BoundaryTranslation, TimeGrid, Trajectory, evolve, step, translate_boundary
from .oracle import (
    AdvectionScenario,
    HypothesisViolated,
    OutsideValidity,
    blowup_time,
    free_boundary_xL,
    oracle_chi,
    oracle_S,
    oracle_u,
    safe_pulse,
)
from .phase_graph import (
    PhaseLaw,
    PositiveIndicator,
    Profile,
    graph_eval,
    graph_inverse,
    graph_resolvent,
    moreau_envelope,
    saturation_from_u,
    yosida_apply,
)
from .pressure import FluidParams, PressureSolution, hydrostatic, permeability, solve_pressure_1d
from .runner import compare, run, simulate
from .scenario import ParseError, Scenario, ValidationError, bundled_scenario, load_scenario
from .stationary import NonConvergence, StationaryParams, StationaryReport, solve_stationary

__all__ = [
    "CoupledProblem",
    "CoupledState",
    "run_coupled",
    "DiscreteOperator",
    "Grid",
    "OperatorCoefficients",
    "OperatorError",
    "apply",
    "assemble_operator",
    "resolvent_solve",
    "BoundaryTranslation",
    "TimeGrid",
    "Trajectory",
    "evolve",
    "step",
    "translate_boundary",
    "AdvectionScenario",
    "HypothesisViolated",
    "OutsideValidity",
    "blowup_time",
    "free_boundary_xL",
    "oracle_chi",
    "oracle_S",
    "oracle_u",
    "safe_pulse",
    "PhaseLaw",
    "PositiveIndicator",
    "Profile",
    "graph_eval",
    "graph_inverse",
    "graph_resolvent",
    "moreau_envelope",
    "saturation_from_u",
    "yosida_apply",
    "FluidParams",
    "PressureSolution",
    "hydrostatic",
    "permeability",
    "solve_pressure_1d",
    "compare",
    "run",
    "simulate",
    "ParseError",
    "Scenario",
    "ValidationError",
    "bundled_scenario",
    "load_scenario",
    "NonConvergence",
    "StationaryParams",
    "StationaryReport",
    "solve_stationary",
]

__version__ = "0.1.0"
