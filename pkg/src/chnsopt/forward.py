"""Time integration of the controlled two-phase flow model.

One step advances the pair (u, phi) by a first-order IMEX rule:

* momentum: viscosity implicit (diagonal per mode), advection and the
  phase-coupling force explicit and dealiased, pressure eliminated by
  projection.  The coupling force is evaluated in the rewritten form
  -(J*phi) grad(phi); the gradient-of-a term drops because the kernel
  weight a is constant on the torus.
* concentration: the stabilizing diffusion S*Lap(phi) implicit with
  S equal to the kernel mass by default, the remaining chemical
  potential terms and advection explicit.

The k = 0 mode of the concentration update is frozen, so the mean of
phi is conserved exactly.  The k = 0 velocity mode is driven only by
the mean of the applied force.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, StabilityError, ValidationError
from .grid import (
    ScalarField,
    TorusGrid,
    VectorField,
    grad_norm,
    h_minus_one_norm,
    require_same_grid,
)
from .physics import Kernel, Potential, chemical_potential


@dataclass(frozen=True)
class ModelParams:
    """Immutable physics bundle shared by every solver in the package."""

    grid: TorusGrid
    kernel: Kernel
    potential: Potential

    def __post_init__(self):
        if self.kernel.grid != self.grid:
            raise ValidationError("kernel was sampled on a different grid")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    nu: float
    stabilization: float | None = None  # None resolves to the kernel mass
    dealias: bool = True

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValidationError("dt must be positive")
        if not self.T > 0.0 or self.dt > self.T * (1.0 + 1e-12):
            raise ValidationError("T must be positive and at least dt")
        if not self.nu > 0.0:
            raise ValidationError("nu must be positive")
        if self.stabilization is not None and self.stabilization < 0.0:
            raise ValidationError("stabilization must be nonnegative")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValidationError("T must be an integer multiple of dt")
        return n

    def stabilization_value(self, kernel: Kernel) -> float:
        return float(
            kernel.mass if self.stabilization is None else self.stabilization
        )


@dataclass
class FlowState:
    u: VectorField
    phi: ScalarField
    t: float

    def __post_init__(self):
        require_same_grid(self.u, self.phi)

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.phi.copy(), self.t)


@dataclass
class Trajectory:
    """Dense record of a forward run: one FlowState per time node.

    diagnostics holds per-node series (t, energy, kinetic, enstrophy,
    mass) and the per-step energy-identity residual (length N, entry n
    belonging to the step from node n to n+1).
    """

    states: list
    dt: float
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    @property
    def grid(self) -> TorusGrid:
        return self.states[0].grid


def signal_node(signal, n: int):
    """Value of a time-indexed signal at node n.

    Accepts None (zero), a single VectorField (constant in time), a
    list/tuple indexed by node, or any object with an at_node method.
    """
    if signal is None:
        return None
    if isinstance(signal, VectorField):
        return signal
    if isinstance(signal, (list, tuple)):
        return signal[n]
    if hasattr(signal, "at_node"):
        return signal.at_node(n)
    raise ValidationError(f"cannot read a time-indexed signal from {type(signal)!r}")


def step_average(signal, n: int):
    """Average of the node-n and node-(n+1) values, the per-step action.

    Centering the control on the step keeps the discrete work pairing
    consistent with trapezoidal time quadrature.
    """
    if signal is None:
        return None
    if isinstance(signal, VectorField):
        return signal
    a = signal_node(signal, n)
    b = signal_node(signal, n + 1)
    return VectorField(
        a.grid, 0.5 * (a.u_x + b.u_x), 0.5 * (a.u_y + b.u_y)
    )


class Stepper:
    """Precomputed spectral machinery for one (params, config) pair.

    Holds the implicit denominators, dealias mask, and kernel transform;
    exposes the spectral one-step update used by the forward, tangent,
    and adjoint sweeps.
    """

    def __init__(self, params: ModelParams, config: SolverConfig):
        g = params.grid
        self.params = params
        self.config = config
        self.grid = g
        dt = config.dt
        self.dt = dt
        self.kx = g.kxg_d
        self.ky = g.kyg_d
        self.ksq = g.ksq
        self.mask = g.dealias_mask if config.dealias else np.ones(g.shape, dtype=bool)
        self.visc_den = 1.0 + config.nu * dt * g.ksq
        self.S = config.stabilization_value(params.kernel)
        self.ch_den = 1.0 + self.S * dt * g.ksq
        self.a = params.kernel.mass
        self.J_hat = params.kernel.hat
        self.cfl_length = min(g.dx, g.dy)

    # -- spectral helpers ----------------------------------------------

    def fft(self, v):
        return np.fft.fft2(v)

    def ifft(self, vh):
        return np.fft.ifft2(vh).real

    def project(self, fx_h, fy_h):
        """Leray projection in transform space; k = 0 passes through."""
        g = self.grid
        div_h = self.kx * fx_h + self.ky * fy_h
        px = fx_h - self.kx * div_h * g.inv_ksq_d
        py = fy_h - self.ky * div_h * g.inv_ksq_d
        return px, py

    def masked_gradients(self, fh):
        m = self.mask
        return self.ifft(1j * self.kx * fh * m), self.ifft(1j * self.ky * fh * m)

    def advect(self, vx, vy, fh):
        """Dealiased transform of v . grad(f) with f given spectrally."""
        fx, fy = self.masked_gradients(fh)
        return self.fft(vx * fx + vy * fy) * self.mask

    # -- one forward step, spectral in / spectral out -------------------

    def forward_step_hat(self, ux_h, uy_h, ph, extra_x, extra_y):
        """Advance (u, phi) transforms one step.

        extra_x/extra_y are the physical control-plus-forcing components
        for this step (already time-averaged), or None.
        """
        m = self.mask
        ux = self.ifft(ux_h * m)
        uy = self.ifft(uy_h * m)
        dux_dx, dux_dy = self.masked_gradients(ux_h)
        duy_dx, duy_dy = self.masked_gradients(uy_h)
        dp_dx, dp_dy = self.masked_gradients(ph)
        conv = self.ifft(self.J_hat * ph * m)

        fx = -(ux * dux_dx + uy * dux_dy) - conv * dp_dx
        fy = -(ux * duy_dx + uy * duy_dy) - conv * dp_dy
        fx_h = self.fft(fx) * m
        fy_h = self.fft(fy) * m
        if extra_x is not None:
            fx_h = fx_h + self.fft(extra_x)
            fy_h = fy_h + self.fft(extra_y)
        fx_h, fy_h = self.project(fx_h, fy_h)
        new_ux_h = (ux_h + self.dt * fx_h) / self.visc_den
        new_uy_h = (uy_h + self.dt * fy_h) / self.visc_den

        phim = self.ifft(ph * m)
        fprime_h = self.fft(self.params.potential.df(phim)) * m
        mu_expl_h = fprime_h - self.J_hat * ph
        if self.a != self.S:
            mu_expl_h = mu_expl_h + (self.a - self.S) * ph
        advect_h = self.fft(ux * dp_dx + uy * dp_dy) * m
        rhs = -self.ksq * mu_expl_h - advect_h
        rhs[0, 0] = 0.0  # exact mass conservation
        new_ph = (ph + self.dt * rhs) / self.ch_den
        return new_ux_h, new_uy_h, new_ph

    def check_cfl(self, ux, uy):
        speed = float(np.max(np.hypot(ux, uy)))
        if speed * self.dt / self.cfl_length > 1.0:
            raise StabilityError(
                f"advective CFL heuristic exceeded: max|u|*dt/dx = "
                f"{speed * self.dt / self.cfl_length:.3g} > 1"
            )


def step(
    state: FlowState,
    control_value: VectorField | None,
    forcing: VectorField | None,
    params: ModelParams,
    config: SolverConfig,
) -> FlowState:
    """One IMEX step from the given state.

    control_value and forcing are this step's (time-averaged) values.
    Raises StabilityError on the advective CFL heuristic and
    NumericError on non-finite output.
    """
    g = params.grid
    require_same_grid(state.u, state.phi)
    if state.grid != g:
        raise ValidationError("state grid does not match params grid")
    st = Stepper(params, config)
    st.check_cfl(state.u.u_x, state.u.u_y)
    extra_x, extra_y = _combine_force(control_value, forcing, g)
    ux_h, uy_h, ph = st.forward_step_hat(
        np.fft.fft2(state.u.u_x),
        np.fft.fft2(state.u.u_y),
        np.fft.fft2(state.phi.values),
        extra_x,
        extra_y,
    )
    return _materialize(g, ux_h, uy_h, ph, state.t + config.dt)


def _combine_force(control_value, forcing, grid):
    total = None
    for f in (control_value, forcing):
        if f is None:
            continue
        if f.grid != grid:
            raise ValidationError("force field grid does not match params grid")
        total = f if total is None else total + f
    if total is None:
        return None, None
    return total.u_x, total.u_y


def _materialize(grid, ux_h, uy_h, ph, t) -> FlowState:
    ux = np.fft.ifft2(ux_h).real
    uy = np.fft.ifft2(uy_h).real
    phi = np.fft.ifft2(ph).real
    if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy)) and np.all(np.isfinite(phi))):
        raise NumericError("solver produced non-finite fields")
    return FlowState(
        VectorField(grid, ux, uy, divergence_free=True), ScalarField(grid, phi), t
    )


def energy(state: FlowState, kernel: Kernel, potential: Potential) -> float:
    """Total free energy: kinetic + nonlocal interaction + potential.

    The interaction term is evaluated as (a<phi,phi> - <J*phi,phi>)/2,
    identical to the quarter double-integral of J(x-y)(phi(x)-phi(y))^2.
    """
    g = state.grid
    phi = state.phi.values
    conv = np.fft.ifft2(kernel.hat * np.fft.fft2(phi)).real
    kinetic = 0.5 * g.cell_area * float(
        np.sum(state.u.u_x**2 + state.u.u_y**2)
    )
    interaction = 0.5 * g.cell_area * float(
        np.sum(kernel.mass * phi * phi - conv * phi)
    )
    bulk = g.cell_area * float(np.sum(potential.f(phi)))
    return kinetic + interaction + bulk


def energy_identity_residual(
    traj: Trajectory,
    forcing,
    control,
    params: ModelParams,
    config: SolverConfig,
) -> np.ndarray:
    """Per-step defect of the energy balance.

    r_n = (E^{n+1} - E^n)/dt + nu*|grad u|^2 + |grad mu|^2 - <h+U, u>,
    with the dissipation and work terms taken at the step's end state
    and the force at the step's time-averaged value.  First-order
    accurate, so r_n = O(dt) on smooth runs.
    """
    g = traj.grid
    dt = traj.dt
    out = np.empty(traj.n_steps)
    e_prev = energy(traj.states[0], params.kernel, params.potential)
    for n in range(traj.n_steps):
        nxt = traj.states[n + 1]
        e_next = energy(nxt, params.kernel, params.potential)
        mu = chemical_potential(nxt.phi, params.kernel, params.potential)
        diss = config.nu * grad_norm(nxt.u) ** 2 + grad_norm(mu) ** 2
        applied = _sum_applied(
            step_average(control, n), step_average(forcing, n)
        )
        work = 0.0
        if applied is not None:
            work = g.inner(applied.u_x, nxt.u.u_x) + g.inner(applied.u_y, nxt.u.u_y)
        out[n] = (e_next - e_prev) / dt + diss - work
        e_prev = e_next
    return out


def _sum_applied(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def simulate(
    initial: FlowState,
    control,
    forcing,
    params: ModelParams,
    config: SolverConfig,
    with_diagnostics: bool = True,
) -> Trajectory:
    """Run the IMEX scheme from t = 0 to T and record every node.

    control/forcing follow the signal_node conventions (None, constant
    VectorField, node-indexed list, or an object with at_node).
    """
    g = params.grid
    if initial.grid != g:
        raise ValidationError("initial state grid does not match params grid")
    n_steps = config.n_steps
    st = Stepper(params, config)

    states = [initial.copy()]
    states[0].t = 0.0
    ux_h = np.fft.fft2(initial.u.u_x)
    uy_h = np.fft.fft2(initial.u.u_y)
    ph = np.fft.fft2(initial.phi.values)

    for n in range(n_steps):
        st.check_cfl(states[n].u.u_x, states[n].u.u_y)
        applied = _sum_applied(step_average(control, n), step_average(forcing, n))
        ex, ey = (None, None) if applied is None else (applied.u_x, applied.u_y)
        if applied is not None and applied.grid != g:
            raise ValidationError("force field grid does not match params grid")
        ux_h, uy_h, ph = st.forward_step_hat(ux_h, uy_h, ph, ex, ey)
        states.append(_materialize(g, ux_h, uy_h, ph, (n + 1) * config.dt))

    traj = Trajectory(states=states, dt=config.dt)
    if with_diagnostics:
        traj.diagnostics = _collect_diagnostics(traj, forcing, control, params, config)
    return traj


def _collect_diagnostics(traj, forcing, control, params, config):
    from .grid import curl2d

    g = traj.grid
    n_nodes = len(traj)
    en = np.empty(n_nodes)
    kin = np.empty(n_nodes)
    ens = np.empty(n_nodes)
    mass = np.empty(n_nodes)
    for i, s in enumerate(traj.states):
        en[i] = energy(s, params.kernel, params.potential)
        kin[i] = 0.5 * s.u.norm() ** 2
        ens[i] = 0.5 * curl2d(s.u).norm() ** 2
        mass[i] = s.phi.mean()
    return {
        "t": traj.times,
        "energy": en,
        "kinetic": kin,
        "enstrophy": ens,
        "mass": mass,
        "residual": energy_identity_residual(traj, forcing, control, params, config),
    }


def sup_state_difference(a: Trajectory, b: Trajectory) -> float:
    """sup over nodes of sqrt(|u_a-u_b|^2 + |phi_a-phi_b|^2 in the dual norm).

    The concentration difference is measured in the discrete H^-1 norm,
    the natural topology for the continuous-dependence estimate.
    """
    if len(a) != len(b):
        raise ValidationError("trajectories have different lengths")
    worst = 0.0
    for sa, sb in zip(a.states, b.states):
        require_same_grid(sa.phi, sb.phi)
        du = sa.u + sb.u * (-1.0)
        dphi = ScalarField(sa.phi.grid, sa.phi.values - sb.phi.values)
        val = du.norm() ** 2 + h_minus_one_norm(dphi) ** 2
        worst = max(worst, val)
    return float(np.sqrt(worst))
