"""Coordinate-chart engine for symmetry reduction of exact symplectic Hamiltonian systems.

Runs restrict-then-reduce (energy level set, then contact reduction) and
reduce-then-restrict (symplectic reduction, then level set) on a declared scenario
and checks that the two reduced contact manifolds agree.
"""

from .expr import Expression, parse
from .geometry import Chart, KForm, SmoothMap, VectorField
from .symplectic import ExactSymplecticSystem, hamiltonian_field_at, liouville_field_at, omega_at
from .contact import ContactStructure, reeb_field_at
from .liegroup import LieSymmetry, compute_k_mu, momentum_at
from .flows import FlowSpec, Trajectory, flow_commutation_check, integrate
from .report import VerificationReport, to_human, to_json_text
from .scenario import Scenario, ScenarioError, load_scenario
from .pipeline import named_field, run_pipeline

__all__ = [
    "Chart", "ContactStructure", "ExactSymplecticSystem", "Expression", "FlowSpec", "KForm",
    "LieSymmetry", "Scenario", "ScenarioError", "SmoothMap", "Trajectory", "VectorField",
    "VerificationReport", "compute_k_mu", "flow_commutation_check", "hamiltonian_field_at",
    "integrate", "liouville_field_at", "load_scenario", "momentum_at", "named_field", "omega_at",
    "parse", "reeb_field_at", "run_pipeline", "to_human", "to_json_text",
]
