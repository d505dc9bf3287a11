"""Offline jump-trajectory optimization for a humanoid robot.

The pipeline runs in three stages plus verification:

1. ``srmp_opt``   -- momentum / inertia planning on a planar pendulum model
2. ``jsm``        -- per-timestep QP mapping onto the full 20-DOF model
3. ``wb_opt``     -- whole-body refinement on the symmetric 5-link model
4. ``verify``     -- physics replay checks on the final trajectory
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DependencyError,
    DomainError,
    FreeFallSingularity,
    SolverFailure,
    VerificationFailure,
)

__all__ = [
    "ConfigurationError",
    "DependencyError",
    "DomainError",
    "FreeFallSingularity",
    "SolverFailure",
    "VerificationFailure",
    "__version__",
]
