import math

import numpy as np
import pytest

from helpers import make_grid, periodic_bcs, rand_velocity

from stagflow import alloc
from stagflow.bcs import BoundarySpec
from stagflow.cases import l2_error, taylor_green, taylor_green_grid
from stagflow.errors import ConfigurationError
from stagflow.fields import VelocityField
from stagflow.operators import divergence, kinetic_energy
from stagflow.poisson import make_solver, project_into
from stagflow.timestep import (
    SSP33,
    WRAY3,
    ButcherTableau,
    Setup,
    cfl_dt,
    rk_step,
    run_steps,
    simulate,
    wray3_step,
)


def test_tableau_validation():
    with pytest.raises(ValueError):
        ButcherTableau(a=((0.0, 0.5), (0.5, 0.0)), b=(0.5, 0.5), c=(0.5, 0.5))
    with pytest.raises(ValueError):
        ButcherTableau(a=((0.0, 0.0), (1.0, 0.0)), b=(0.4, 0.4), c=(0.0, 1.0))
    with pytest.raises(ValueError):
        ButcherTableau(a=((0.0, 0.0), (1.0, 0.0)), b=(0.5, 0.5), c=(0.0, 0.5))
    assert SSP33.stages == 3
    assert WRAY3.stages == 3
    assert sum(WRAY3.b) == pytest.approx(1.0)
    # third-order conditions for both tableaus
    for tab in (SSP33, WRAY3):
        b, c = np.array(tab.b), np.array(tab.c)
        a = np.array(tab.a)
        assert np.dot(b, c) == pytest.approx(0.5, abs=1e-13)
        assert np.dot(b, c**2) == pytest.approx(1.0 / 3.0, abs=1e-13)
        assert float(b @ a @ c) == pytest.approx(1.0 / 6.0, abs=1e-13)


def test_cfl_examples():
    g = make_grid((10, 10), lengths=(1.0, 1.0))
    v = VelocityField(g)
    # quiescent inviscid flow: no limit at all
    assert cfl_dt(v, 0.0, g, 1.0, 1.0) == math.inf
    v.u[0][...] = 2.0
    dt = cfl_dt(v, 0.0, g, 1.0, 1.0)
    assert dt == pytest.approx(0.05, rel=1e-12)
    with pytest.raises(ValueError):
        cfl_dt(v, 0.0, g, -1.0, 1.0)


def test_cfl_matches_scalar_loop():
    rng = np.random.default_rng(0)
    g = make_grid((6, 5), stretched=True)
    v = rand_velocity(g, rng)
    nu = 0.01
    dt = cfl_dt(v, nu, g, 0.85, 0.85)
    best_conv = math.inf
    for a in range(2):
        sl = g.u_slices(a)
        for i in range(sl[0].start, sl[0].stop):
            for j in range(sl[1].start, sl[1].stop):
                speed = abs(v.u[a][i, j])
                if speed > 0:
                    width = g.du[a][i if a == 0 else j]
                    best_conv = min(best_conv, width / speed)
    h = min(float(np.min(ax.widths)) for ax in g.axes)
    best_diff = h * h / (2 * 2 * nu)
    assert dt == pytest.approx(min(0.85 * best_conv, 0.85 * best_diff), rel=1e-12)


def _tg_setup(n=16, nu=0.01, method="ssp33", solver="spectral"):
    grid = taylor_green_grid(n)
    bcs = BoundarySpec.all_periodic(2)
    setup = Setup(grid, bcs, nu=nu, solver=solver, method=method)
    return grid, bcs, setup


def test_zero_rhs_step_is_identity():
    grid, bcs, setup = _tg_setup(nu=0.0)
    state = setup.new_state()
    rk_step(state, 0.1, SSP33, setup.solver, setup)
    assert state.t == pytest.approx(0.1)
    assert state.step == 1
    for a in range(2):
        assert np.all(state.u.u[a] == 0.0)


def test_scalar_ode_embedding_matches_stability_polynomial():
    # u1 = sin(k y), a divergence-free eigenfunction of the discrete
    # diffusion: one projected step must scale it by the cubic Taylor
    # polynomial of exp at z = nu * lambda * dt
    n, nu = 16, 0.35
    grid, bcs, setup = _tg_setup(n=n, nu=nu)
    k = 2
    h = 2 * math.pi / n
    lam = (2 * math.cos(k * h) - 2) / h**2
    yc = grid.broadcast(grid.xc[1], 1)
    u0 = VelocityField(grid)
    u0.u[0][...] = np.sin(k * yc) + np.zeros(grid.ext_shape)
    state = setup.new_state(u0=u0)
    dt = 0.11
    rk_step(state, dt, SSP33, setup.solver, setup)
    z = nu * lam * dt
    growth = 1.0 + z + z**2 / 2.0 + z**3 / 6.0
    sl = grid.u_slices(0)
    assert np.allclose(state.u.u[0][sl], growth * u0.u[0][sl], rtol=1e-12, atol=1e-13)
    assert np.max(np.abs(state.u.u[1][grid.u_slices(1)])) <= 1e-13


def test_temporal_order_richardson():
    # fixed grid, shrinking dt: the error against a tiny-step reference
    # falls at third order
    grid, bcs, setup = _tg_setup(n=16, nu=0.05)
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    t_final = 0.4

    def run(dt):
        return simulate(setup, t_final, dt=dt, u0=u0).u

    ref = run(t_final / 256)
    errs = []
    for divide in (8, 16, 32):
        u = run(t_final / divide)
        errs.append(l2_error(u, ref))
    o1 = math.log2(errs[0] / errs[1])
    o2 = math.log2(errs[1] / errs[2])
    assert o1 >= 2.7
    assert o2 >= 2.7


def test_wray3_equivalent_to_general_tableau():
    rng = np.random.default_rng(1)
    grid, bcs, setup_w = _tg_setup(n=12, nu=0.02, method="wray3")
    _, _, setup_r = _tg_setup(n=12, nu=0.02, method="ssp33")
    u0 = rand_velocity(grid, rng)
    sw = setup_w.new_state(u0=u0)
    sr = setup_r.new_state(u0=u0)
    for st, setup in ((sw, setup_w), (sr, setup_r)):
        ws = st.workspace
        project_into(st.u, setup.solver, bcs, scratch=ws.scratch,
                     p_div=ws.p_div, p_out=ws.p_sol)
    dt = 0.013
    wray3_step(sw, dt, setup_w.solver, setup_w)
    rk_step(sr, dt, WRAY3, setup_r.solver, setup_r)
    for a in range(2):
        scale = np.max(np.abs(sr.u.u[a]))
        assert np.max(np.abs(sw.u.u[a] - sr.u.u[a])) <= 1e-13 * scale


def test_wray3_register_budget_and_zero_allocations():
    grid, bcs, setup = _tg_setup(n=16, nu=0.01, method="wray3")
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    state = setup.new_state(u0=u0)
    assert state.workspace.velocity_register_count == 2  # plus the state itself
    run_steps(setup, 3, dt=0.01, state=state)
    before = alloc.allocation_count()
    run_steps(setup, 100, dt=0.01, state=state, project_initial=False)
    assert alloc.allocation_count() - before == 0


def test_ssp33_zero_allocations_in_fixed_loop():
    grid, bcs, setup = _tg_setup(n=16, nu=0.01, method="ssp33", solver="cg")
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    state = setup.new_state(u0=u0)
    run_steps(setup, 3, dt=0.01, state=state)
    before = alloc.allocation_count()
    run_steps(setup, 100, dt=0.01, state=state, project_initial=False)
    assert alloc.allocation_count() - before == 0


def test_divergence_free_after_every_step():
    grid, bcs, setup = _tg_setup(n=16, nu=0.01)
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    seen = []

    def obs(state):
        seen.append(float(np.max(np.abs(divergence(state.u).interior))))

    simulate(setup, 0.2, dt=0.02, u0=u0, observers=(obs,), observer_cadence=1)
    assert len(seen) >= 10
    assert max(seen) <= 1e-11


def test_simulate_zero_horizon_returns_initial():
    grid, bcs, setup = _tg_setup()
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    state = simulate(setup, 0.0, dt=0.1, u0=u0)
    assert state.step == 0
    assert state.t == 0.0


def test_simulate_truncates_last_step_exactly():
    grid, bcs, setup = _tg_setup(nu=0.01)
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    t_final = 0.05 * 3 + 0.017
    state = simulate(setup, t_final, dt=0.05, u0=u0)
    assert state.t == t_final
    assert state.step == 4


def test_simulate_deterministic_bitwise():
    grid, bcs, setup = _tg_setup(nu=0.01)
    u0, _ = taylor_green(grid, setup.nu, 0.0)
    s1 = simulate(setup, 0.1, dt=0.01, u0=u0)
    s2 = simulate(setup, 0.1, dt=0.01, u0=u0)
    for a in range(2):
        assert np.array_equal(s1.u.u[a], s2.u.u[a])


def test_simulate_rejects_bad_dt_spec():
    grid, bcs, setup = _tg_setup()
    with pytest.raises(ConfigurationError):
        simulate(setup, 1.0, dt="sometimes")
    with pytest.raises(ValueError):
        simulate(setup, 1.0, dt=-0.1)


def test_observers_get_read_only_state():
    grid, bcs, setup = _tg_setup(nu=0.01)
    u0, _ = taylor_green(grid, setup.nu, 0.0)

    def vandal(state):
        with pytest.raises(ValueError):
            state.u.u[0][2, 2] = 99.0

    simulate(setup, 0.02, dt=0.01, u0=u0, observers=(vandal,), observer_cadence=1)


def test_inviscid_energy_drift_temporal_order():
    rng = np.random.default_rng(2)
    grid, bcs, setup = _tg_setup(n=16, nu=0.0)
    u0 = rand_velocity(grid, rng)
    st0 = setup.new_state(u0=u0)
    ws = st0.workspace
    project_into(st0.u, setup.solver, bcs, scratch=ws.scratch,
                 p_div=ws.p_div, p_out=ws.p_sol)
    uref = st0.u.copy()
    drifts = []
    for dt in (0.02, 0.01, 0.005):
        st = setup.new_state(u0=uref)
        e0 = kinetic_energy(st.u)
        rk_step(st, dt, SSP33, setup.solver, setup)
        drifts.append(abs(kinetic_energy(st.u) - e0) / e0)
    assert math.log2(drifts[0] / drifts[1]) >= 2.7
    assert math.log2(drifts[1] / drifts[2]) >= 2.7


def test_adaptive_step_accounts_for_eddy_viscosity():
    # a closure raises the effective viscosity; the adaptive step must
    # respect the tightened diffusive limit (a fixed molecular-only step
    # on this setup blows up within a few steps)
    from stagflow.cases import channel_setup
    from stagflow.les import ClosureModel

    setup = channel_setup(
        12, 16, 8, gamma=2.0, seed=0, solver="direct",
        closure=ClosureModel(kind="smagorinsky", c=0.1),
    )
    state = run_steps(setup, 40)
    assert all(bool(np.all(np.isfinite(state.u.u[a]))) for a in range(3))
    assert np.max(np.abs(divergence(state.u).interior)) <= 1e-10


def test_time_varying_wall_drives_flow():
    # lid velocity ramps linearly in time; the stepping plumbing must
    # evaluate the boundary data at the stage times
    from stagflow.bcs import BoundarySpec, Dirichlet, Periodic
    from stagflow.grid import build_grid, uniform_grid

    def lid(component, x, y, t):
        return 0.5 * t if component == 0 else 0.0

    bcs = BoundarySpec([(Periodic(), Periodic()), (Dirichlet(0.0), Dirichlet(lid))])
    grid = build_grid((uniform_grid(0, 1, 8), uniform_grid(0, 1, 8)), bcs)
    setup = Setup(grid, bcs, nu=0.05, solver="direct", method="ssp33")
    state = simulate(setup, 0.2, dt=0.02)
    ny = grid.shape[1]
    wall_avg = 0.5 * (state.u.u[0][1:, ny] + state.u.u[0][1:, ny + 1])
    assert np.allclose(wall_avg, 0.5 * state.t, rtol=1e-12)
    assert all(bool(np.all(np.isfinite(state.u.u[a]))) for a in range(2))
    # the moving lid has dragged interior fluid along
    assert float(np.max(state.u.u[0][grid.u_slices(0)])) > 0.01
