"""Distributed optimal control: cost, reduced gradient, optimizer, and
the pointwise optimality instruments (Hamiltonian, spike variations,
Ekeland metric, minimum-principle residual).

The reduced gradient of the tracking cost with respect to a distributed
control is w_c*U + p with p the backward adjoint momentum; stationarity
is U = -p/w_c.  The optimizer is projected gradient descent with an
Armijo backtracking line search, which keeps the cost history
non-increasing by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import LineSearchStallError, ValidationError
from .forward import FlowState, ModelParams, SolverConfig, Trajectory, simulate
from .grid import (
    ScalarField,
    TorusGrid,
    VectorField,
    curl2d,
    grad_norm,
    leray_project,
    require_same_grid,
)
from .tangent_adjoint import (
    AdjointMode,
    AdjointTrajectory,
    adjoint_solve,
    duality_gap,
    tangent_solve,
    terminal_adjoint_data,
    _tracking_sources,
    _trapz_weights,
)
from .forward import Stepper, signal_node


@dataclass(frozen=True)
class CostWeights:
    """Multipliers on the five cost terms; all 1 reproduces the plain sum."""

    track_u: float = 1.0
    track_phi: float = 1.0
    final_u: float = 1.0
    final_phi: float = 1.0
    control: float = 1.0

    def __post_init__(self):
        for name in ("track_u", "track_phi", "final_u", "final_phi", "control"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"cost weight {name} must be nonnegative")


@dataclass
class CostTargets:
    """Tracking and terminal references for both problems.

    u_d/phi_d (node-indexed) and u_f/phi_f serve the distributed
    problem; u_M/phi_M and the terminal pair u_M_f/phi_M_f serve the
    assimilation problem.  None entries read as zero references.
    """

    u_d: object = None
    phi_d: object = None
    u_f: VectorField | None = None
    phi_f: ScalarField | None = None
    u_M: object = None
    phi_M: object = None
    u_M_f: VectorField | None = None
    phi_M_f: ScalarField | None = None
    weights: CostWeights = field(default_factory=CostWeights)


class ControlSignal:
    """A distributed control (one VectorField per time node) or a single
    initial-velocity field, with the vector-space helpers the optimizer
    needs."""

    DISTRIBUTED = "distributed"
    INITIAL = "initial"

    def __init__(self, kind, fields=None, dt=None, initial=None):
        if kind not in (self.DISTRIBUTED, self.INITIAL):
            raise ValidationError(f"unknown control kind {kind!r}")
        self.kind = kind
        if kind == self.DISTRIBUTED:
            if not fields or len(fields) < 2:
                raise ValidationError("distributed control needs >= 2 time nodes")
            if dt is None or not dt > 0.0:
                raise ValidationError("distributed control needs a positive dt")
            g = fields[0].grid
            for f in fields[1:]:
                if f.grid != g:
                    raise ValidationError("control nodes live on different grids")
            self.fields = list(fields)
            self.dt = float(dt)
            self.initial = None
        else:
            if initial is None:
                raise ValidationError("initial-velocity control needs a field")
            self.fields = None
            self.dt = None
            self.initial = initial

    # -- constructors ----------------------------------------------------

    @classmethod
    def zeros_distributed(cls, grid: TorusGrid, n_nodes: int, dt: float):
        return cls(
            cls.DISTRIBUTED,
            fields=[VectorField.zeros(grid) for _ in range(n_nodes)],
            dt=dt,
        )

    @classmethod
    def zeros_initial(cls, grid: TorusGrid):
        return cls(cls.INITIAL, initial=VectorField.zeros(grid))

    @classmethod
    def constant(cls, value: VectorField, n_nodes: int, dt: float):
        return cls(
            cls.DISTRIBUTED, fields=[value.copy() for _ in range(n_nodes)], dt=dt
        )

    # -- signal protocol ---------------------------------------------------

    @property
    def n_nodes(self) -> int:
        if self.kind != self.DISTRIBUTED:
            raise ValidationError("initial-velocity control has no time grid")
        return len(self.fields)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dt

    def at_node(self, n: int) -> VectorField:
        if self.kind != self.DISTRIBUTED:
            raise ValidationError("initial-velocity control is not time-indexed")
        return self.fields[n]

    @property
    def grid(self) -> TorusGrid:
        return self.fields[0].grid if self.kind == self.DISTRIBUTED else self.initial.grid

    def copy(self) -> "ControlSignal":
        if self.kind == self.DISTRIBUTED:
            return ControlSignal(
                self.DISTRIBUTED, fields=[f.copy() for f in self.fields], dt=self.dt
            )
        return ControlSignal(self.INITIAL, initial=self.initial.copy())

    # -- vector-space helpers ----------------------------------------------

    def _check_compatible(self, other: "ControlSignal"):
        if self.kind != other.kind:
            raise ValidationError("mixed control kinds")
        if self.kind == self.DISTRIBUTED:
            if self.n_nodes != other.n_nodes or self.dt != other.dt:
                raise ValidationError("control signals on different time grids")

    def axpy(self, alpha: float, other: "ControlSignal") -> "ControlSignal":
        """self + alpha * other, as a new signal."""
        self._check_compatible(other)
        if self.kind == self.DISTRIBUTED:
            out = [
                VectorField(
                    a.grid,
                    a.u_x + alpha * b.u_x,
                    a.u_y + alpha * b.u_y,
                    a.divergence_free and b.divergence_free,
                )
                for a, b in zip(self.fields, other.fields)
            ]
            return ControlSignal(self.DISTRIBUTED, fields=out, dt=self.dt)
        a, b = self.initial, other.initial
        return ControlSignal(
            self.INITIAL,
            initial=VectorField(
                a.grid,
                a.u_x + alpha * b.u_x,
                a.u_y + alpha * b.u_y,
                a.divergence_free and b.divergence_free,
            ),
        )

    def scaled(self, alpha: float) -> "ControlSignal":
        if self.kind == self.DISTRIBUTED:
            out = [
                VectorField(f.grid, alpha * f.u_x, alpha * f.u_y, f.divergence_free)
                for f in self.fields
            ]
            return ControlSignal(self.DISTRIBUTED, fields=out, dt=self.dt)
        f = self.initial
        return ControlSignal(
            self.INITIAL,
            initial=VectorField(f.grid, alpha * f.u_x, alpha * f.u_y, f.divergence_free),
        )

    def inner(self, other: "ControlSignal") -> float:
        """Time-space inner product (trapezoidal in time when distributed)."""
        self._check_compatible(other)
        if self.kind == self.INITIAL:
            return self.initial.dot(other.initial)
        tw = _trapz_weights(self.n_nodes, self.dt)
        return float(
            sum(w * a.dot(b) for w, a, b in zip(tw, self.fields, other.fields))
        )

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def ball_projected(self, radius: float) -> "ControlSignal":
        """Projection onto the centered ball of the given time-space radius."""
        n = self.norm()
        if not np.isfinite(radius) or n <= radius:
            return self
        return self.scaled(radius / n)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 100
    step0: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    grad_tol: float = 1e-6
    radius: float = np.inf

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValidationError("max_iters must be nonnegative")
        if not self.step0 > 0.0:
            raise ValidationError("step0 must be positive")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValidationError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValidationError("armijo_shrink must lie in (0, 1)")
        if not self.grad_tol > 0.0:
            raise ValidationError("grad_tol must be positive")
        if not self.radius > 0.0:
            raise ValidationError("radius must be positive")


def cost_ocp(
    traj: Trajectory,
    control: ControlSignal,
    targets: CostTargets,
    enstrophy_form: str = "grad",
) -> float:
    """Tracking cost: enstrophy of the velocity mismatch, concentration
    mismatch, terminal mismatches, and the control energy, trapezoidal
    in time.

    enstrophy_form selects |grad(u-u_d)| ("grad") or |curl(u-u_d)|
    ("curl"); the two agree for divergence-free mismatches.
    """
    if enstrophy_form not in ("grad", "curl"):
        raise ValidationError(f"unknown enstrophy form {enstrophy_form!r}")
    w = targets.weights
    g = traj.grid
    n_nodes = len(traj)
    if control.kind != ControlSignal.DISTRIBUTED or control.n_nodes != n_nodes:
        raise ValidationError("control does not match the trajectory time grid")
    tw = _trapz_weights(n_nodes, traj.dt)
    total = 0.0
    for n, s in enumerate(traj.states):
        u_ref = signal_node(targets.u_d, n)
        du = s.u if u_ref is None else s.u + u_ref * (-1.0)
        if enstrophy_form == "grad":
            track_u = grad_norm(du) ** 2
        else:
            track_u = curl2d(du).norm() ** 2
        phi_ref = _scalar_ref(targets.phi_d, n)
        dphi = s.phi.values - (0.0 if phi_ref is None else phi_ref.values)
        track_phi = g.inner(dphi, dphi)
        Un = control.at_node(n)
        total += tw[n] * 0.5 * (
            w.track_u * track_u + w.track_phi * track_phi + w.control * Un.dot(Un)
        )
    last = traj.final
    du_f = last.u if targets.u_f is None else last.u + targets.u_f * (-1.0)
    total += 0.5 * w.final_u * du_f.dot(du_f)
    dphi_f = last.phi.values - (
        0.0 if targets.phi_f is None else targets.phi_f.values
    )
    total += 0.5 * w.final_phi * g.inner(dphi_f, dphi_f)
    return float(total)


def _scalar_ref(signal, n):
    if signal is None:
        return None
    if isinstance(signal, ScalarField):
        return signal
    if isinstance(signal, (list, tuple)):
        return signal[n]
    if hasattr(signal, "at_node"):
        return signal.at_node(n)
    raise ValidationError(f"cannot read a time-indexed signal from {type(signal)!r}")


def reduced_gradient_ocp(
    control: ControlSignal,
    adjoint_traj: AdjointTrajectory,
    weights: CostWeights | None = None,
) -> ControlSignal:
    """Nodewise gradient w_c*U + p of the reduced cost."""
    w_c = (weights or CostWeights()).control
    if control.kind != ControlSignal.DISTRIBUTED:
        raise ValidationError("distributed gradient needs a distributed control")
    if control.n_nodes != len(adjoint_traj):
        raise ValidationError("control and adjoint time grids differ")
    out = []
    for n in range(control.n_nodes):
        Un = control.at_node(n)
        pn = adjoint_traj.at_node(n).p
        out.append(
            VectorField(Un.grid, w_c * Un.u_x + pn.u_x, w_c * Un.u_y + pn.u_y)
        )
    return ControlSignal(ControlSignal.DISTRIBUTED, fields=out, dt=control.dt)


class DistributedControlProblem:
    """Reduced-cost oracle for the distributed problem.

    cost(U) simulates forward; gradient(U, traj) solves the adjoint and
    assembles w_c*U + p; project is the identity (whole-space admissible
    set; the optimizer applies the optional norm ball separately).
    """

    mode = AdjointMode.DISTRIBUTED

    def __init__(self, initial: FlowState, targets: CostTargets, forcing, params, config):
        self.initial = initial
        self.targets = targets
        self.forcing = forcing
        self.params = params
        self.config = config

    def cost(self, control: ControlSignal):
        traj = simulate(
            self.initial, control, self.forcing, self.params, self.config,
            with_diagnostics=False,
        )
        return cost_ocp(traj, control, self.targets), traj

    def gradient(self, control: ControlSignal, traj: Trajectory) -> ControlSignal:
        adj = adjoint_solve(traj, self.mode, self.targets, self.params, self.config)
        return reduced_gradient_ocp(control, adj, self.targets.weights)

    def project(self, control: ControlSignal) -> ControlSignal:
        return control

    def zero_control(self) -> ControlSignal:
        return ControlSignal.zeros_distributed(
            self.params.grid, self.config.n_steps + 1, self.config.dt
        )


def optimize(problem, initial_guess: ControlSignal, opt_config: OptimizerConfig):
    """Projected gradient descent with Armijo backtracking.

    Returns (control, history); history rows carry iter, cost,
    grad_norm, step, wall_seconds.  When the line search exhausts its 40
    shrinks the run ends normally if the iterate is already stationary
    to roughly square-root machine precision (no decrease is resolvable
    in float64 there); otherwise LineSearchStallError is raised, which
    usually means the gradient is not a descent direction.
    """
    t_start = time.perf_counter()
    U = problem.project(initial_guess).ball_projected(opt_config.radius)
    J, aux = problem.cost(U)
    history = [
        {
            "iter": 0,
            "cost": J,
            "grad_norm": float("nan"),
            "step": 0.0,
            "wall_seconds": time.perf_counter() - t_start,
        }
    ]
    step = opt_config.step0
    for it in range(opt_config.max_iters):
        G = problem.gradient(U, aux)
        gn = G.norm()
        history[-1]["grad_norm"] = gn
        if gn / max(1.0, U.norm()) <= opt_config.grad_tol:
            break
        accepted = False
        s = step
        max_move = 0.0
        for _ in range(40):
            U_try = problem.project(U.axpy(-s, G)).ball_projected(opt_config.radius)
            dU = U_try.axpy(-1.0, U)
            move = dU.norm() ** 2
            max_move = max(max_move, move)
            if move == 0.0:
                break  # projection pinned the iterate exactly
            J_try, aux_try = problem.cost(U_try)
            if J_try <= J - (opt_config.armijo_c / s) * move:
                accepted = True
                break
            s *= opt_config.armijo_shrink
        if not accepted:
            if gn / max(1.0, U.norm()) <= max(opt_config.grad_tol, 1.5e-8):
                break  # stationary to float64 resolution
            if max_move <= (1e-13 * max(1.0, U.norm())) ** 2:
                break  # projection pins every trial: constrained stationary point
            raise LineSearchStallError(
                f"line search stalled at iteration {it}: cost {J:.6e}, "
                f"gradient norm {gn:.3e}, smallest step tried {s:.3e}"
            )
        U, J, aux = U_try, J_try, aux_try
        step = s / opt_config.armijo_shrink  # warm start, one notch up
        history.append(
            {
                "iter": it + 1,
                "cost": J,
                "grad_norm": float("nan"),
                "step": s,
                "wall_seconds": time.perf_counter() - t_start,
            }
        )
    return U, history


def solve_ocp(
    initial: FlowState,
    targets: CostTargets,
    forcing,
    params: ModelParams,
    config: SolverConfig,
    opt_config: OptimizerConfig,
    initial_guess: ControlSignal | None = None,
):
    """Convenience wrapper: build the distributed problem and optimize."""
    problem = DistributedControlProblem(initial, targets, forcing, params, config)
    U0 = initial_guess if initial_guess is not None else problem.zero_control()
    U, history = optimize(problem, U0, opt_config)
    return U, history, problem


# -- pointwise optimality instruments ------------------------------------


def spike_variation(
    control: ControlSignal, tau: float, h: float, W: VectorField
) -> ControlSignal:
    """Replace the control by W on the time window (tau - h, tau]."""
    if control.kind != ControlSignal.DISTRIBUTED:
        raise ValidationError("spike variations need a distributed control")
    T = (control.n_nodes - 1) * control.dt
    if not 0.0 < h <= tau <= T * (1.0 + 1e-12):
        raise ValidationError("need 0 < h <= tau <= T")
    tol = 1e-9 * control.dt
    out = []
    for n, t in enumerate(control.times):
        if tau - h + tol < t <= tau + tol:
            out.append(W.copy())
        else:
            out.append(control.at_node(n).copy())
    return ControlSignal(ControlSignal.DISTRIBUTED, fields=out, dt=control.dt)


def spike_limit_reference(
    base: Trajectory,
    control: ControlSignal,
    tau: float,
    W: VectorField,
    params: ModelParams,
    config: SolverConfig,
) -> VectorField:
    """Linearized terminal velocity response to a vanishing spike at tau.

    The spike replaces the control by W on (tau - h, tau]; as h shrinks
    the rescaled terminal difference (u^h(T) - u(T))/h approaches the
    tangent velocity seeded just after the spike node with the
    one-step-damped impulse P(W - U(tau)) / (1 + nu |k|^2 dt).
    """
    g = params.grid
    dt = config.dt
    j = int(round(tau / dt))
    if not 0 <= j <= config.n_steps:
        raise ValidationError("tau falls outside the control time grid")
    dW = leray_project(W - control.at_node(j))
    den = 1.0 + config.nu * g.ksq * dt
    seed = VectorField(
        g,
        g.ifft2(g.fft2(dW.u_x) / den),
        g.ifft2(g.fft2(dW.u_y) / den),
        True,
    )
    start = min(j + 1, config.n_steps)
    tan = tangent_solve(base, None, seed, None, params, config, start_node=start)
    return tan.states[-1].w


def ekeland_metric(u1: ControlSignal, u2: ControlSignal) -> float:
    """dt times the number of time nodes where the controls differ
    (beyond 1e-14 relative), the discrete measure of the disagreement
    set."""
    if u1.kind != ControlSignal.DISTRIBUTED or u2.kind != ControlSignal.DISTRIBUTED:
        raise ValidationError("the Ekeland metric compares distributed controls")
    u1._check_compatible(u2)
    count = 0
    for a, b in zip(u1.fields, u2.fields):
        require_same_grid(a, b)
        na = a.norm()
        nb = b.norm()
        d = VectorField(a.grid, a.u_x - b.u_x, a.u_y - b.u_y).norm()
        if d > 1e-14 * max(na, nb):
            count += 1
    return u1.dt * count


def hamiltonian(
    state: FlowState,
    U_value: VectorField,
    adjoint,
    targets: CostTargets,
    params: ModelParams,
    nu: float,
    node: int | None = None,
) -> float:
    """Running cost plus adjoint pairings with the state equations'
    right-hand sides, evaluated at one time node.

    As a function of U_value this is (w_c/2)|U|^2 + <p, U> + const, so
    its minimizer over all fields is -p/w_c.
    """
    w = targets.weights
    g = params.grid
    u_ref = _vector_ref(targets.u_d, node)
    phi_ref = _scalar_ref(targets.phi_d, node)
    du = state.u if u_ref is None else state.u + u_ref * (-1.0)
    dphi = state.phi.values - (0.0 if phi_ref is None else phi_ref.values)
    lagr = 0.5 * (
        w.track_u * grad_norm(du) ** 2
        + w.track_phi * g.inner(dphi, dphi)
        + w.control * U_value.dot(U_value)
    )

    m = g.dealias_mask
    ux_h = g.fft2(state.u.u_x)
    uy_h = g.fft2(state.u.u_y)
    ph = g.fft2(state.phi.values)
    ux = g.ifft2(ux_h * m)
    uy = g.ifft2(uy_h * m)
    dux = (g.ifft2(1j * g.kxg_d * ux_h * m), g.ifft2(1j * g.kyg_d * ux_h * m))
    duy = (g.ifft2(1j * g.kxg_d * uy_h * m), g.ifft2(1j * g.kyg_d * uy_h * m))
    dph = (g.ifft2(1j * g.kxg_d * ph * m), g.ifft2(1j * g.kyg_d * ph * m))
    conv = g.ifft2(params.kernel.hat * ph * m)

    # momentum right-hand side: nu*Lap(u) - (u.grad)u - (J*phi)grad(phi) + U
    fx = -(ux * dux[0] + uy * dux[1]) - conv * dph[0]
    fy = -(ux * duy[0] + uy * duy[1]) - conv * dph[1]
    fx_h = g.fft2(fx) * m + g.fft2(U_value.u_x) - nu * g.ksq * ux_h
    fy_h = g.fft2(fy) * m + g.fft2(U_value.u_y) - nu * g.ksq * uy_h
    div_h = g.kxg_d * fx_h + g.kyg_d * fy_h
    fx_h = fx_h - g.kxg_d * div_h * g.inv_ksq_d
    fy_h = fy_h - g.kyg_d * div_h * g.inv_ksq_d
    n1x = g.ifft2(fx_h)
    n1y = g.ifft2(fy_h)

    fprime_h = g.fft2(params.potential.df(g.ifft2(ph * m))) * m
    mu_h = params.kernel.mass * ph - params.kernel.hat * ph + fprime_h
    n2 = g.ifft2(-g.ksq * mu_h) - (ux * dph[0] + uy * dph[1])

    pair_p = g.inner(adjoint.p.u_x, n1x) + g.inner(adjoint.p.u_y, n1y)
    pair_eta = g.inner(adjoint.eta.values, n2)
    return float(lagr + pair_p + pair_eta)


def _vector_ref(signal, n):
    if signal is None:
        return None
    if isinstance(signal, VectorField):
        return signal
    if isinstance(signal, (list, tuple)):
        if n is None:
            raise ValidationError("node index needed for time-indexed targets")
        return signal[n]
    if hasattr(signal, "at_node"):
        return signal.at_node(n)
    raise ValidationError(f"cannot read a time-indexed signal from {type(signal)!r}")


def build_trial_controls(
    control: ControlSignal,
    adjoint_traj: AdjointTrajectory,
    rng: np.random.Generator,
    n_random_pairs: int = 7,
    weights: CostWeights | None = None,
):
    """Per-node trial set for the minimum principle: zero, the
    closed-form minimizer -p/w_c, and +-random divergence-free fields
    matched to the control's node norm (16 trials with the default
    pair count)."""
    from .synth import random_divfree_velocity

    w_c = (weights or CostWeights()).control
    g = control.grid
    randoms = [
        random_divfree_velocity(g, rng, amplitude=1.0, k_cut=4.0)
        for _ in range(n_random_pairs)
    ]

    def trials(node: int):
        Un = control.at_node(node)
        pn = adjoint_traj.at_node(node).p
        scale = Un.norm()
        out = [VectorField.zeros(g), pn * (-1.0 / w_c)]
        for r in randoms:
            rn = r.norm()
            s = scale / rn if rn > 0 else 0.0
            out.append(r * s)
            out.append(r * (-s))
        return out

    return trials


def minimum_principle_residual(
    control: ControlSignal,
    adjoint_traj: AdjointTrajectory,
    trial_controls,
    weights: CostWeights | None = None,
) -> np.ndarray:
    """Per-node max over trial fields W of

        [w_c/2 |U|^2 + <p,U>] - [w_c/2 |W|^2 + <p,W>].

    Nonpositive entries certify the pointwise minimum property at that
    node against the sampled trials.
    """
    w_c = (weights or CostWeights()).control
    n_nodes = control.n_nodes
    if len(adjoint_traj) != n_nodes:
        raise ValidationError("control and adjoint time grids differ")
    out = np.empty(n_nodes)
    for n in range(n_nodes):
        Un = control.at_node(n)
        pn = adjoint_traj.at_node(n).p
        base = 0.5 * w_c * Un.dot(Un) + pn.dot(Un)
        trials = trial_controls(n) if callable(trial_controls) else trial_controls
        best = -np.inf
        for W in trials:
            val = base - (0.5 * w_c * W.dot(W) + pn.dot(W))
            best = max(best, val)
        out[n] = best
    return out


def directional_derivative(
    base: Trajectory,
    control: ControlSignal,
    direction: ControlSignal,
    mode: AdjointMode,
    targets: CostTargets,
    params: ModelParams,
    config: SolverConfig,
) -> float:
    """Exact derivative of the discrete cost along a control direction,
    assembled from one tangent solve (no adjoint involved).

    Used to separate the O(dt) adjoint-consistency floor from the
    quadratic Taylor remainder in gradient tests.
    """
    g = params.grid
    st = Stepper(params, config)
    tang = tangent_solve(base, direction, None, None, params, config)
    n_nodes = len(base)
    tw = _trapz_weights(n_nodes, config.dt)
    w = targets.weights

    val = 0.0
    for n in range(n_nodes):
        spx, spy, seta = _tracking_sources(mode, targets, base.states[n], n, st)
        ts = tang.at_node(n)
        val += tw[n] * (
            g.inner(spx, ts.w.u_x)
            + g.inner(spy, ts.w.u_y)
            + g.inner(seta, ts.psi.values)
        )
        if mode is AdjointMode.DISTRIBUTED:
            val += tw[n] * w.control * control.at_node(n).dot(direction.at_node(n))
    p_T, eta_T = terminal_adjoint_data(base, mode, targets)
    val += p_T.dot(tang.final.w) + eta_T.inner(tang.final.psi)
    if mode is AdjointMode.ASSIMILATION:
        val += w.control * control.initial.dot(direction.initial)
    return float(val)


def taylor_remainders(problem, U: ControlSignal, direction: ControlSignal, hs):
    """Cost remainders |J(U+hV) - J(U) - h<G,V>| over a step ladder.

    Returns (remainders, gradient_pairing, base_cost).
    """
    J0, aux = problem.cost(U)
    G = problem.gradient(U, aux)
    gv = G.inner(direction)
    rem = []
    for h in hs:
        Jh, _ = problem.cost(U.axpy(float(h), direction))
        rem.append(abs(Jh - J0 - float(h) * gv))
    return np.array(rem), gv, J0


def observed_orders(values, hs) -> np.ndarray:
    """Pairwise convergence orders of a ladder of positive values."""
    values = np.asarray(values, dtype=float)
    hs = np.asarray(hs, dtype=float)
    eps = 1e-300
    return np.log(np.maximum(values[:-1], eps) / np.maximum(values[1:], eps)) / np.log(
        hs[:-1] / hs[1:]
    )
