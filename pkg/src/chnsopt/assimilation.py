"""Initial-velocity data assimilation.

The unknown is the initial velocity U; the concentration initial datum
is fixed.  The cost penalizes the mismatch to measured velocity and
concentration histories plus terminal mismatches and a Tikhonov control
term; its gradient is w_c*U + p(0) with p the assimilation-mode adjoint.
twin_experiment generates measurements from a known truth and measures
how well optimization recovers it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .control import (
    ControlSignal,
    CostTargets,
    CostWeights,
    OptimizerConfig,
    optimize,
)
from .errors import ValidationError
from .forward import FlowState, ModelParams, SolverConfig, Trajectory, signal_node, simulate
from .grid import ScalarField, VectorField, leray_project
from .tangent_adjoint import AdjointMode, AdjointTrajectory, adjoint_solve


@dataclass
class AssimilationProblem:
    """Measurement records plus the fixed pieces of the forward model."""

    measurements: CostTargets
    phi0: ScalarField
    forcing: object
    params: ModelParams
    config: SolverConfig

    def __post_init__(self):
        if self.measurements.u_M_f is None or self.measurements.phi_M_f is None:
            raise ValidationError(
                "assimilation needs terminal measurements u_M_f and phi_M_f"
            )

    def initial_state(self, U: VectorField) -> FlowState:
        return FlowState(leray_project(U), self.phi0.copy(), 0.0)


def cost_da(traj: Trajectory, U: VectorField, problem: AssimilationProblem) -> float:
    """Tikhonov term plus tracking and terminal measurement mismatches."""
    m = problem.measurements
    w = m.weights
    g = traj.grid
    from .tangent_adjoint import _trapz_weights

    tw = _trapz_weights(len(traj), traj.dt)
    total = 0.5 * w.control * U.dot(U)
    for n, s in enumerate(traj.states):
        u_ref = signal_node(m.u_M, n)
        du = s.u if u_ref is None else s.u - u_ref
        phi_ref = _scalar_node(m.phi_M, n)
        dphi = s.phi.values - (0.0 if phi_ref is None else phi_ref.values)
        total += tw[n] * 0.5 * (
            w.track_u * du.dot(du) + w.track_phi * g.inner(dphi, dphi)
        )
    last = traj.final
    du_f = last.u - m.u_M_f
    dphi_f = last.phi.values - m.phi_M_f.values
    total += 0.5 * w.final_u * du_f.dot(du_f)
    total += 0.5 * w.final_phi * g.inner(dphi_f, dphi_f)
    return float(total)


def _scalar_node(signal, n):
    if signal is None:
        return None
    if isinstance(signal, ScalarField):
        return signal
    if isinstance(signal, (list, tuple)):
        return signal[n]
    if hasattr(signal, "at_node"):
        return signal.at_node(n)
    raise ValidationError(f"cannot read a time-indexed signal from {type(signal)!r}")


def reduced_gradient_da(
    U: VectorField,
    adjoint_traj: AdjointTrajectory,
    weights: CostWeights | None = None,
) -> VectorField:
    """w_c*U + p(0), projected divergence-free."""
    w_c = (weights or CostWeights()).control
    p0 = adjoint_traj.initial.p
    return leray_project(
        VectorField(U.grid, w_c * U.u_x + p0.u_x, w_c * U.u_y + p0.u_y)
    )


class InitialVelocityProblem:
    """Reduced-cost oracle over the initial velocity for optimize()."""

    mode = AdjointMode.ASSIMILATION

    def __init__(self, problem: AssimilationProblem):
        self.problem = problem

    def cost(self, control: ControlSignal):
        if control.kind != ControlSignal.INITIAL:
            raise ValidationError("assimilation controls the initial velocity")
        traj = simulate(
            self.problem.initial_state(control.initial),
            None,
            self.problem.forcing,
            self.problem.params,
            self.problem.config,
            with_diagnostics=False,
        )
        return cost_da(traj, control.initial, self.problem), traj

    def gradient(self, control: ControlSignal, traj: Trajectory) -> ControlSignal:
        adj = adjoint_solve(
            traj,
            self.mode,
            self.problem.measurements,
            self.problem.params,
            self.problem.config,
        )
        g = reduced_gradient_da(
            control.initial, adj, self.problem.measurements.weights
        )
        return ControlSignal(ControlSignal.INITIAL, initial=g)

    def project(self, control: ControlSignal) -> ControlSignal:
        return ControlSignal(
            ControlSignal.INITIAL, initial=leray_project(control.initial)
        )


def record_measurements(
    traj: Trajectory,
    weights: CostWeights,
    noise_level: float = 0.0,
    rng: np.random.Generator | None = None,
) -> CostTargets:
    """Turn a trajectory into full-field measurements, optionally
    perturbed by Gaussian noise of the given relative magnitude."""
    if noise_level < 0.0:
        raise ValidationError("noise_level must be nonnegative")
    if noise_level > 0.0 and rng is None:
        raise ValidationError("noisy measurements need a random generator")

    def vec(f: VectorField) -> VectorField:
        if noise_level == 0.0:
            return f.copy()
        n = f.norm()
        gx = rng.standard_normal(f.grid.shape)
        gy = rng.standard_normal(f.grid.shape)
        gn = VectorField(f.grid, gx, gy).norm()
        s = noise_level * n / gn if gn > 0 else 0.0
        return VectorField(f.grid, f.u_x + s * gx, f.u_y + s * gy)

    def sca(f: ScalarField) -> ScalarField:
        if noise_level == 0.0:
            return f.copy()
        n = f.norm()
        gv = rng.standard_normal(f.grid.shape)
        gn = ScalarField(f.grid, gv).norm()
        s = noise_level * n / gn if gn > 0 else 0.0
        return ScalarField(f.grid, f.values + s * gv)

    u_M = [vec(s.u) for s in traj.states]
    phi_M = [sca(s.phi) for s in traj.states]
    return CostTargets(
        u_M=u_M,
        phi_M=phi_M,
        u_M_f=u_M[-1],
        phi_M_f=phi_M[-1],
        weights=weights,
    )


def twin_experiment(
    U_true: VectorField,
    noise_level: float,
    problem_template: AssimilationProblem,
    opt_config: OptimizerConfig,
    rng: np.random.Generator | None = None,
) -> dict:
    """Generate measurements from U_true, assimilate from zero, report.

    The returned dict carries initial/final cost, their ratio, the
    relative recovery error, the recovered field, and the optimizer
    history.
    """
    tmpl = problem_template
    truth_traj = simulate(
        tmpl.initial_state(U_true),
        None,
        tmpl.forcing,
        tmpl.params,
        tmpl.config,
        with_diagnostics=False,
    )
    measurements = record_measurements(
        truth_traj, tmpl.measurements.weights, noise_level, rng
    )
    problem = AssimilationProblem(
        measurements=measurements,
        phi0=tmpl.phi0,
        forcing=tmpl.forcing,
        params=tmpl.params,
        config=tmpl.config,
    )
    U0 = ControlSignal.zeros_initial(tmpl.params.grid)
    U_rec, history = optimize(InitialVelocityProblem(problem), U0, opt_config)

    err = (U_rec.initial - leray_project(U_true)).norm()
    scale = U_true.norm()
    return {
        "initial_cost": history[0]["cost"],
        "final_cost": history[-1]["cost"],
        "cost_ratio": history[-1]["cost"] / max(history[0]["cost"], 1e-300),
        "recovery_error": err / scale if scale > 0 else err,
        "iterations": len(history) - 1,
        "recovered": U_rec.initial,
        "history": history,
        "problem": problem,
    }
