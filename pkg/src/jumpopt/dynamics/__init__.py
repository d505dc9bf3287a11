from .model import KinematicModel, build_model
from .engine import (
    DynamicsEvaluation,
    centroidal_quantities,
    evaluate_dynamics,
    forward_dynamics,
    full_evaluation,
    inverse_dynamics,
    kinetic_energy,
    marker_kinematics,
    potential_energy,
    rk4_step,
    total_energy,
)

__all__ = [
    "KinematicModel",
    "build_model",
    "DynamicsEvaluation",
    "evaluate_dynamics",
    "marker_kinematics",
    "centroidal_quantities",
    "full_evaluation",
    "inverse_dynamics",
    "forward_dynamics",
    "kinetic_energy",
    "potential_energy",
    "total_energy",
    "rk4_step",
]
