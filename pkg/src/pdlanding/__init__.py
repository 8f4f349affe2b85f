"""Fuel-optimal powered-descent landing: solvers and structure verification."""

from .analyze import (Arc, Contact, PmpTolerances, StructureReport, Verdict, analyze_trajectory,
                      classify_arcs, detect_contacts, verify_feasibility, verify_pmp,
                      verify_structure)
from .direct import MultiplierTrace, TranscriptionConfig, solve_direct, transcribe
from .indirect import (ConvergenceError, ShootingError, ShootingUnknowns, SingularArcError,
                       shoot, solve_indirect)
from .integrate import FuelExhausted, IntegrationError, Trajectory, propagate, rk4_step, simpson
from .model import (ConstraintSet, Control, ModelError, Scenario, State, VehicleParams,
                    eval_dynamics, glide_slope, hover_throttle, mars_scenario, vertical_scenario)
from .pmp import Costate, adjoint_rhs, direction_law, hamiltonian, switching_function

__version__ = "0.1.0"

__all__ = [
    "Arc", "Contact", "PmpTolerances", "StructureReport", "Verdict", "analyze_trajectory",
    "classify_arcs", "detect_contacts", "verify_feasibility", "verify_pmp", "verify_structure",
    "MultiplierTrace", "TranscriptionConfig", "solve_direct", "transcribe",
    "ConvergenceError", "ShootingError", "ShootingUnknowns", "SingularArcError", "shoot",
    "solve_indirect", "FuelExhausted", "IntegrationError", "Trajectory", "propagate", "rk4_step",
    "simpson", "ConstraintSet", "Control", "ModelError", "Scenario", "State", "VehicleParams",
    "eval_dynamics", "glide_slope", "hover_throttle", "mars_scenario", "vertical_scenario",
    "Costate", "adjoint_rhs", "direction_law", "hamiltonian", "switching_function",
]
