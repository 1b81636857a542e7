"""Explicit Runge-Kutta time integration with per-stage pressure projection.

The stepping loop is allocation-free after setup: every stage register,
kernel scratch array, and pressure buffer lives in a :class:`Workspace`
created once, and the kernels write into caller-supplied buffers.  The
low-storage path keeps only the state and two right-hand-side registers
by carrying each register's scale factor forward instead of copying.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError, NumericalError
from .fields import ScalarField, VelocityField, fill_ghosts_velocity
from .operators import KernelScratch, _table, momentum_rhs, sample_force
from .poisson import make_solver, project_into


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit Runge-Kutta method."""

    a: tuple
    b: tuple
    c: tuple

    def __post_init__(self):
        s = len(self.b)
        if len(self.a) != s or len(self.c) != s:
            raise ValueError("inconsistent tableau sizes")
        for i, row in enumerate(self.a):
            if len(row) != s:
                raise ValueError("tableau rows must have one entry per stage")
            if any(row[j] != 0.0 for j in range(i, s)):
                raise ValueError("tableau must be strictly lower triangular (explicit)")
            if abs(sum(row) - self.c[i]) > 1e-12:
                raise ValueError(f"stage time c[{i}] must equal the row sum of a")
        if abs(sum(self.b) - 1.0) > 1e-12:
            raise ValueError("weights b must sum to one")

    @property
    def stages(self):
        return len(self.b)


SSP33 = ButcherTableau(
    a=((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.25, 0.25, 0.0)),
    b=(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0),
    c=(0.0, 1.0, 0.5),
)

# Three-stage scheme with the minimal-register update
# u <- u + dt*(gamma_i F_i + zeta_i F_{i-1})
WRAY3_GAMMA = (8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0)
WRAY3_ZETA = (0.0, -17.0 / 60.0, -5.0 / 12.0)
WRAY3 = ButcherTableau(
    a=((0.0, 0.0, 0.0), (8.0 / 15.0, 0.0, 0.0), (0.25, 5.0 / 12.0, 0.0)),
    b=(0.25, 0.0, 0.75),
    c=(0.0, 8.0 / 15.0, 2.0 / 3.0),
)

TABLEAUS = {"ssp33": SSP33, "wray3": WRAY3}


class Workspace:
    """All buffers the stepping loop touches, allocated once."""

    def __init__(self, grid, n_velocity_registers):
        self.scratch = KernelScratch(grid)
        self.p_div = ScalarField(grid)
        self.p_sol = ScalarField(grid)
        self.vel = [VelocityField(grid) for _ in range(n_velocity_registers)]

    @property
    def velocity_register_count(self):
        return len(self.vel)


@dataclass
class SimState:
    u: VelocityField
    t: float
    step: int = 0
    workspace: Workspace = None
    pressure: ScalarField = None


class Setup:
    """Bundle of everything one simulation needs, built once."""

    def __init__(
        self,
        grid,
        bcs,
        nu=0.0,
        force=None,
        closure=None,
        solver="direct",
        method="ssp33",
        cfl_conv=0.85,
        cfl_diff=0.85,
        dt_max=math.inf,
        solver_tol=None,
        solver_max_iter=None,
        ic=None,
    ):
        if nu < 0:
            raise ValueError(f"viscosity must be nonnegative, got {nu}")
        self.grid = grid
        self.bcs = bcs
        self.nu = float(nu)
        self.force = sample_force(grid, force)
        self.closure = closure
        if isinstance(solver, str):
            solver = make_solver(solver, grid, bcs, tol=solver_tol, max_iter=solver_max_iter)
        self.solver = solver
        if method not in TABLEAUS:
            raise ConfigurationError(f"unknown time integration method: {method!r}")
        self.method = method
        self.tableau = TABLEAUS[method]
        self.cfl_conv = float(cfl_conv)
        self.cfl_diff = float(cfl_diff)
        self.dt_max = float(dt_max)
        self.ic = ic

    def new_state(self, u0=None, t0=0.0):
        n_reg = 2 if self.method == "wray3" else self.tableau.stages + 1
        ws = Workspace(self.grid, n_reg)
        state = SimState(u=VelocityField(self.grid), t=float(t0), workspace=ws)
        if u0 is None and self.ic is not None:
            u0 = self.ic(self.grid) if callable(self.ic) else self.ic
        if u0 is not None:
            state.u.copy_from(u0)
        fill_ghosts_velocity(state.u, self.bcs, t0)
        return state


def cfl_dt(u, nu, grid, c_conv, c_diff):
    """Largest stable step from convective and diffusive limits.

    Convective limit per component against its own-direction staggered
    width; diffusive limit from the smallest volume width.  Returns +inf
    when neither mechanism is active (caller clamps to a maximum step).
    """
    if c_conv <= 0 or c_diff <= 0:
        raise ValueError("CFL safety factors must be positive")
    dt_conv = math.inf
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        speed = np.abs(u.u[a][sl])
        widths = _table(grid, grid.du[a], a, sl[a])
        with np.errstate(divide="ignore"):
            ratio = np.where(speed > 0, widths / speed, math.inf)
        m = float(np.min(ratio))
        dt_conv = min(dt_conv, m)
    dt_diff = math.inf
    if nu > 0:
        h = min(float(np.min(ax.widths)) for ax in grid.axes)
        dt_diff = h * h / (2.0 * grid.dim * nu)
    dt = min(c_conv * dt_conv, c_diff * dt_diff)
    return dt


def _axpy(dst, src, coef, grid, scratch):
    """dst += coef * src on the DOF ranges, via one scratch array."""
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        t = scratch.w1[sl]
        np.multiply(src.u[a][sl], coef, out=t)
        dst.u[a][sl] += t


def rk_step(state, dt, tableau, solver, setup):
    """One projected explicit Runge-Kutta step (any explicit tableau)."""
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    ws = state.workspace
    grid = setup.grid
    bcs = setup.bcs
    s = tableau.stages
    if len(ws.vel) < s + 1:
        raise ConfigurationError("workspace has too few velocity registers for this tableau")
    ks = ws.vel[:s]
    acc = ws.vel[s]
    u0 = state.u
    for j in range(s):
        t_stage = state.t + tableau.c[j] * dt
        if j == 0:
            y = u0
        else:
            acc.copy_from(u0)
            for l in range(j):
                alj = tableau.a[j][l]
                if alj != 0.0:
                    _axpy(acc, ks[l], dt * alj, grid, ws.scratch)
            project_into(acc, solver, bcs, t=t_stage, scratch=ws.scratch,
                         p_div=ws.p_div, p_out=ws.p_sol)
            y = acc
        momentum_rhs(y, setup.nu, force=setup.force, closure=setup.closure,
                     t=t_stage, out=ks[j], scratch=ws.scratch)
    acc.copy_from(u0)
    for l in range(s):
        bl = tableau.b[l]
        if bl != 0.0:
            _axpy(acc, ks[l], dt * bl, grid, ws.scratch)
    p = project_into(acc, solver, bcs, t=state.t + dt, scratch=ws.scratch,
                     p_div=ws.p_div, p_out=ws.p_sol)
    state.u, ws.vel[s] = acc, u0
    state.pressure = p
    state.t += dt
    state.step += 1
    return state


def wray3_step(state, dt, solver, setup):
    """Low-storage three-stage step: the state plus two RHS registers.

    Registers carry their running scale so stage updates never need an
    extra buffer; the result matches :func:`rk_step` with the equivalent
    tableau to rounding.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    ws = state.workspace
    grid = setup.grid
    bcs = setup.bcs
    u = state.u
    fnew, fold = ws.vel[0], ws.vel[1]
    for i in range(3):
        t_stage = state.t + WRAY3.c[i] * dt
        momentum_rhs(u, setup.nu, force=setup.force, closure=setup.closure,
                     t=t_stage, out=fnew, scratch=ws.scratch)
        for a in range(grid.dim):
            sl = grid.u_slices(a)
            fnew.u[a][sl] *= dt * WRAY3_GAMMA[i]
            u.u[a][sl] += fnew.u[a][sl]
            if i > 0:
                # fold holds dt*gamma[i-1]*F_{i-1}; rescale to dt*zeta[i]*F_{i-1}
                fold.u[a][sl] *= WRAY3_ZETA[i] / WRAY3_GAMMA[i - 1]
                u.u[a][sl] += fold.u[a][sl]
        t_next = state.t + (WRAY3.c[i + 1] if i < 2 else 1.0) * dt
        p = project_into(u, solver, bcs, t=t_next, scratch=ws.scratch,
                         p_div=ws.p_div, p_out=ws.p_sol)
        fnew, fold = fold, fnew
    state.pressure = p
    state.t += dt
    state.step += 1
    return state


def _step(state, dt, setup):
    if setup.method == "wray3":
        return wray3_step(state, dt, setup.solver, setup)
    return rk_step(state, dt, setup.tableau, setup.solver, setup)


def _adaptive_dt(state, setup):
    """CFL step bound; an active closure tightens the diffusive limit."""
    nu_eff = setup.nu
    closure = setup.closure
    if closure is not None and getattr(closure, "kind", "none") != "none":
        nut = closure.nu_t(state.u)
        nu_eff = setup.nu + float(np.max(nut.interior))
    dt = cfl_dt(state.u, nu_eff, setup.grid, setup.cfl_conv, setup.cfl_diff)
    dt = min(dt, setup.dt_max)
    if not math.isfinite(dt):
        raise NumericalError("adaptive step is unbounded; set dt_max")
    return dt


def simulate(setup, t_final, dt="adaptive", observers=(), u0=None,
             observer_cadence=1, state=None, project_initial=True):
    """March from the initial state to ``t_final``.

    ``dt`` is a fixed step or ``"adaptive"`` (CFL-based, recomputed every
    step).  The last step is shortened to land on ``t_final`` exactly.
    Observers are called with the (read-only) state every
    ``observer_cadence`` accepted steps and at the final time.
    """
    if state is None:
        state = setup.new_state(u0=u0)
    if t_final < state.t:
        raise ValueError("t_final must not precede the current time")
    ws = state.workspace
    if project_initial:
        project_into(state.u, setup.solver, setup.bcs, t=state.t,
                     scratch=ws.scratch, p_div=ws.p_div, p_out=ws.p_sol)
    adaptive = isinstance(dt, str)
    if adaptive and dt != "adaptive":
        raise ConfigurationError(f"unknown time step spec: {dt!r}")
    if not adaptive and dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    _notify(observers, state)
    while state.t < t_final:
        dt_step = _adaptive_dt(state, setup) if adaptive else dt
        remaining = t_final - state.t
        last = dt_step >= remaining * (1.0 - 1e-12)
        if last:
            dt_step = remaining
        try:
            _step(state, dt_step, setup)
        except (ConvergenceError, NumericalError) as exc:
            err = NumericalError(f"step {state.step + 1} failed: {exc}")
            err.state = state
            raise err from exc
        if last:
            state.t = t_final
        if observers and state.step % observer_cadence == 0:
            _notify(observers, state)
    if observers and state.step % observer_cadence != 0:
        _notify(observers, state)
    return state


def run_steps(setup, n_steps, dt="adaptive", observers=(), observer_cadence=1,
              state=None, u0=None, project_initial=True):
    """March a fixed number of accepted steps (adaptive or fixed dt)."""
    if state is None:
        state = setup.new_state(u0=u0)
    ws = state.workspace
    if project_initial:
        project_into(state.u, setup.solver, setup.bcs, t=state.t,
                     scratch=ws.scratch, p_div=ws.p_div, p_out=ws.p_sol)
    adaptive = isinstance(dt, str)
    for _ in range(n_steps):
        dt_step = _adaptive_dt(state, setup) if adaptive else dt
        try:
            _step(state, dt_step, setup)
        except (ConvergenceError, NumericalError) as exc:
            err = NumericalError(f"step {state.step + 1} failed: {exc}")
            err.state = state
            raise err from exc
        if observers and state.step % observer_cadence == 0:
            _notify(observers, state)
    return state


def _notify(observers, state):
    for arr in state.u.u:
        arr.flags.writeable = False
    try:
        for obs in observers:
            obs(state)
    finally:
        for arr in state.u.u:
            arr.flags.writeable = True
