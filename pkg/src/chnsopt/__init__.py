"""Optimal control and data assimilation for a nonlocal two-phase flow model.

A velocity field and an order parameter evolve on a periodic box: the
order parameter by convection and nonlocal Cahn-Hilliard diffusion, the
velocity by the incompressible Navier-Stokes equations forced through a
Korteweg stress.  The package provides the pseudo-spectral forward
solver, exact tangent and continuous adjoint sweeps, reduced-gradient
descent for distributed-control and initial-velocity problems, and the
pointwise optimality instruments (spike variations, Ekeland metric,
Hamiltonian minimization residuals) used to certify computed controls.
"""

from .assimilation import (
    AssimilationProblem,
    InitialVelocityProblem,
    cost_da,
    record_measurements,
    reduced_gradient_da,
    twin_experiment,
)
from .control import (
    ControlSignal,
    CostTargets,
    CostWeights,
    DistributedControlProblem,
    OptimizerConfig,
    build_trial_controls,
    cost_ocp,
    directional_derivative,
    ekeland_metric,
    hamiltonian,
    minimum_principle_residual,
    observed_orders,
    optimize,
    reduced_gradient_ocp,
    solve_ocp,
    spike_limit_reference,
    spike_variation,
    taylor_remainders,
)
from .errors import (
    AssumptionError,
    GridMismatchError,
    LineSearchStallError,
    NumericError,
    StabilityError,
    ToolkitError,
    ValidationError,
)
from .forward import (
    FlowState,
    ModelParams,
    SolverConfig,
    Trajectory,
    energy,
    energy_identity_residual,
    simulate,
    step,
    sup_state_difference,
)
from .grid import (
    ScalarField,
    TorusGrid,
    VectorField,
    convolve,
    curl2d,
    div,
    grad,
    grad_norm,
    h_minus_one_norm,
    laplacian,
    leray_project,
    read_snapshot,
    read_vector_snapshot,
    relative_divergence,
    write_snapshot,
    write_vector_snapshot,
)
from .physics import (
    Kernel,
    Potential,
    chemical_potential,
    kernel_weight_a,
    korteweg_force,
    validate_assumptions,
)
from .tangent_adjoint import (
    AdjointMode,
    AdjointState,
    AdjointTrajectory,
    TangentState,
    TangentTrajectory,
    adjoint_solve,
    duality_gap,
    tangent_solve,
    terminal_adjoint_data,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointMode",
    "AdjointState",
    "AdjointTrajectory",
    "AssimilationProblem",
    "AssumptionError",
    "ControlSignal",
    "CostTargets",
    "CostWeights",
    "DistributedControlProblem",
    "FlowState",
    "GridMismatchError",
    "InitialVelocityProblem",
    "Kernel",
    "LineSearchStallError",
    "ModelParams",
    "NumericError",
    "OptimizerConfig",
    "Potential",
    "ScalarField",
    "SolverConfig",
    "StabilityError",
    "TangentState",
    "TangentTrajectory",
    "ToolkitError",
    "TorusGrid",
    "Trajectory",
    "ValidationError",
    "VectorField",
    "adjoint_solve",
    "build_trial_controls",
    "chemical_potential",
    "convolve",
    "cost_da",
    "cost_ocp",
    "curl2d",
    "directional_derivative",
    "div",
    "duality_gap",
    "ekeland_metric",
    "energy",
    "energy_identity_residual",
    "grad",
    "grad_norm",
    "h_minus_one_norm",
    "hamiltonian",
    "kernel_weight_a",
    "korteweg_force",
    "laplacian",
    "leray_project",
    "minimum_principle_residual",
    "observed_orders",
    "optimize",
    "read_snapshot",
    "read_vector_snapshot",
    "record_measurements",
    "reduced_gradient_da",
    "reduced_gradient_ocp",
    "relative_divergence",
    "simulate",
    "solve_ocp",
    "spike_limit_reference",
    "spike_variation",
    "step",
    "sup_state_difference",
    "tangent_solve",
    "taylor_remainders",
    "terminal_adjoint_data",
    "twin_experiment",
    "validate_assumptions",
    "write_snapshot",
    "write_vector_snapshot",
]
