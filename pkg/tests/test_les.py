import math

import numpy as np
import pytest

from helpers import (
    dense_vel_to_vel,
    make_grid,
    periodic_bcs,
    rand_velocity,
    vel_to_vec,
)

from stagflow.fields import ScalarField, VelocityField, fill_ghosts_velocity
from stagflow.les import (
    ClosureModel,
    GradientTensorField,
    axis_widths,
    eddy_stress_divergence,
    filter_width,
    gradient_at_centers,
    invariants,
    nut_qr,
    nut_s3pqr,
    nut_sigma,
    nut_smagorinsky,
    nut_vreman,
    nut_wale,
    singular_values,
)
from stagflow.operators import velocity_weights, weighted_inner

LD = np.longdouble


def tensor_of(A):
    return GradientTensorField(None, np.asarray(A, dtype=np.float64).reshape(1, 1, 3, 3))


def oracle_models(A64, c, delta, deltas, p):
    """Independent per-point evaluation: plain matrix algebra in extended
    precision plus LAPACK singular values."""
    A = np.asarray(A64, dtype=LD)
    S = 0.5 * (A + A.T)
    W = 0.5 * (A - A.T)
    qs = -0.5 * np.trace(S @ S)
    qw = -0.5 * np.trace(W @ W)
    qa = -0.5 * np.trace(A @ A)
    rs = np.trace(S @ S @ S) / 3
    v2 = 4 * (np.trace(S @ S @ W @ W) - 2 * qs * qw)
    paa = np.trace(A @ A.T)
    qaa = v2 + qa**2
    out = {}
    out["smagorinsky"] = float((c * delta) ** 2 * np.sqrt(max(-4 * qs, 0)))
    rows = np.asarray(A64) * np.asarray(deltas)[None, :]
    b = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            cr = np.cross(rows[i], rows[j])
            b += float(np.dot(cr, cr))
    out["vreman"] = 0.0 if paa <= 0 else float(c**2 * np.sqrt(b / float(paa / 2)))
    out["qr"] = 0.0 if qs >= 0 else float((c * delta) ** 2 * abs(rs) / (-qs))
    A2 = A @ A
    Sd = 0.5 * (A2 + A2.T) - np.trace(A2) / 3 * np.eye(3, dtype=LD)
    sdsd = np.sum(Sd * Sd)
    ss = np.sum(S * S)
    den = ss ** LD(2.5) + sdsd ** LD(1.25)
    out["wale"] = 0.0 if den <= 0 else float((c * delta) ** 2 * sdsd ** LD(1.5) / den)
    s1, s2, s3 = np.linalg.svd(np.asarray(A64), compute_uv=False)
    out["sigma"] = 0.0 if s1 <= 0 else float(
        (c * delta) ** 2 * s3 * (s1 - s2) * (s2 - s3) / s1**2
    )
    pp = LD(p)
    raa = (np.trace(A @ A @ A) / 3) ** 2
    if paa <= 0:
        out["s3pqr"] = 0.0
    else:
        f = paa**pp
        f *= qaa ** (-(pp + 1)) if qaa > 0 else (LD(0) if -(p + 1) > 0 else LD(1))
        ex = LD(p + 2.5) / 3
        f *= LD(1) if ex == 0 else raa**ex
        out["s3pqr"] = float((c * delta) ** 2 * f)
    return out


def model_values(t, c, delta, deltas, p):
    return {
        "smagorinsky": nut_smagorinsky(t, c, delta),
        "vreman": nut_vreman(t, c, deltas),
        "qr": nut_qr(t, c, delta),
        "wale": nut_wale(t, c, delta),
        "sigma": nut_sigma(t, c, delta),
        "s3pqr": nut_s3pqr(t, c, delta, p),
    }


def test_gradient_linear_shear_exact():
    g = make_grid((8, 7), stretched=True)
    a_coef = 0.7
    v = VelocityField(g)
    yc = g.broadcast(g.xc[1], 1)
    v.u[0][...] = a_coef * yc + np.zeros(g.ext_shape)
    t = gradient_at_centers(v)
    assert np.allclose(t.a[..., 0, 1], a_coef, rtol=1e-13)
    assert np.allclose(t.a[..., 0, 0], 0.0, atol=1e-13)


def test_gradient_rigid_rotation():
    g = make_grid((8, 7), stretched=True)
    w = 0.3
    v = VelocityField(g)
    yc = g.broadcast(g.xc[1], 1)
    xc = g.broadcast(g.xc[0], 0)
    v.u[0][...] = -w * yc + np.zeros(g.ext_shape)
    v.u[1][...] = w * xc + np.zeros(g.ext_shape)
    t = gradient_at_centers(v)
    assert np.max(np.abs(t.sym)) <= 1e-13
    assert np.allclose(t.antisym[..., 0, 1], -w, rtol=1e-13)


def test_gradient_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    g = make_grid((6, 5), stretched=True)
    bcs = periodic_bcs(2)
    v = rand_velocity(g, rng)
    fill_ghosts_velocity(v, bcs)
    t = gradient_at_centers(v)
    for i in range(1, g.shape[0] + 1):
        for j in range(1, g.shape[1] + 1):
            a00 = (v.u[0][i, j] - v.u[0][i - 1, j]) / g.dx[0][i]
            assert t.a[i - 1, j - 1, 0, 0] == pytest.approx(a00, rel=1e-12)
            corners = []
            for ci in (i - 1, i):
                for cj in (j - 1, j):
                    corners.append(
                        (v.u[0][ci, cj + 1] - v.u[0][ci, cj]) / g.du[1][cj]
                    )
            assert t.a[i - 1, j - 1, 0, 1] == pytest.approx(
                sum(corners) / 4.0, rel=1e-12
            )


def test_invariants_examples():
    t = tensor_of(np.zeros((3, 3)))
    inv = t.invariants()
    for name in ("q_a", "q_s", "q_w", "r_s", "r_a", "v2", "p_aa", "q_aa", "r_aa"):
        assert float(getattr(inv, name).ravel()[0]) == 0.0
    a = 0.8
    t = tensor_of(np.diag([a, -a, 0.0]))
    inv = t.invariants()
    assert float(inv.q_s.ravel()[0]) == pytest.approx(-a * a, rel=1e-14)
    assert float(inv.q_w.ravel()[0]) == 0.0
    assert float(inv.r_s.ravel()[0]) == 0.0
    assert float(inv.p_aa.ravel()[0]) == pytest.approx(2 * a * a, rel=1e-14)


def test_invariants_match_trace_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        A = rng.standard_normal((3, 3))
        inv = tensor_of(A).invariants()
        S = 0.5 * (A + A.T)
        W = 0.5 * (A - A.T)
        assert float(inv.q_s.ravel()[0]) == pytest.approx(-0.5 * np.trace(S @ S), rel=1e-12)
        assert float(inv.r_a.ravel()[0]) == pytest.approx(np.trace(A @ A @ A) / 3, rel=1e-10, abs=1e-12)
        v2_ref = 4 * (np.trace(S @ S @ W @ W) - 2 * (-0.5 * np.trace(S @ S)) * (-0.5 * np.trace(W @ W)))
        assert float(inv.v2.ravel()[0]) == pytest.approx(v2_ref, rel=1e-9, abs=1e-12)
        assert float(inv.q_s.ravel()[0]) <= 0.0
        assert float(inv.p_aa.ravel()[0]) >= 0.0
        assert float(inv.r_aa.ravel()[0]) >= 0.0


def test_model_plugin_values():
    c, delta = 0.2, 0.15
    a = 0.9
    t = tensor_of(np.diag([a, -a, 0.0]))
    nut = nut_smagorinsky(t, c, delta)
    assert float(nut.ravel()[0]) == pytest.approx((c * delta) ** 2 * 2 * a, rel=1e-13)
    # pure rotation: strain-based models vanish
    w = 0.4
    rot = np.zeros((3, 3))
    rot[0, 1], rot[1, 0] = -w, w
    t = tensor_of(rot)
    assert float(nut_smagorinsky(t, c, delta).ravel()[0]) <= 1e-15
    assert float(nut_qr(t, c, delta).ravel()[0]) == 0.0
    t = tensor_of(np.diag([3.0, 2.0, 1.0]))
    assert float(nut_sigma(t, 1.0, 1.0).ravel()[0]) == pytest.approx(1.0 / 9.0, rel=1e-11)
    t = tensor_of(np.zeros((3, 3)))
    assert float(nut_vreman(t, 1.0, (1.0, 1.0, 1.0)).ravel()[0]) == 0.0


def test_all_models_match_independent_oracle():
    rng = np.random.default_rng(20260809)
    c, delta, deltas, p = 0.2, 0.1, (0.1, 0.2, 0.3), -2.5
    worst = {}
    for trial in range(1000):
        A = rng.standard_normal((3, 3))
        if trial % 5 == 0:
            A[2, :] = 0.0
            A[:, 2] = 0.0
        t = tensor_of(A)
        mine = model_values(t, c, delta, deltas, p)
        ref = oracle_models(A, c, delta, deltas, p)
        for k, v in mine.items():
            m = float(v.ravel()[0])
            assert m >= 0.0
            r = ref[k]
            if r == 0.0:
                assert m == 0.0
            else:
                rel = abs(m - r) / abs(r)
                worst[k] = max(worst.get(k, 0.0), rel)
    for k, v in worst.items():
        assert v <= 1e-12, (k, v)


def test_qr_vanishes_for_solenoidal_2d_fields():
    from stagflow.poisson import make_solver, project

    rng = np.random.default_rng(3)
    g = make_grid((8, 7), stretched=True)
    bcs = periodic_bcs(2)
    solver = make_solver("direct", g, bcs)
    u = rand_velocity(g, rng)
    up, _ = project(u, solver, bcs)
    t = gradient_at_centers(up)
    c, delta = 0.3, 0.1
    nut = nut_qr(t, c, delta)
    strain = float(np.max(np.abs(t.sym)))
    assert np.max(nut) <= 1e-12 * (c * delta) ** 2 * max(strain, 1.0)
    # structurally traceless two-component tensors give exactly zero
    A = rng.standard_normal((3, 3))
    A[2, :] = 0.0
    A[:, 2] = 0.0
    A[1, 1] = -A[0, 0]
    assert float(nut_qr(tensor_of(A), c, delta).ravel()[0]) == 0.0


def test_sigma_degeneracies():
    c, delta = 0.5, 0.2
    rng = np.random.default_rng(4)
    # two-component: exact zero
    A = rng.standard_normal((3, 3))
    A[2, :] = 0.0
    A[:, 2] = 0.0
    assert float(nut_sigma(tensor_of(A), c, delta).ravel()[0]) == 0.0
    # repeated singular values: vanishing to rounding
    for diag in ((2.0, 2.0, 1.0), (3.0, 1.5, 1.5)):
        val = float(nut_sigma(tensor_of(np.diag(diag)), c, delta).ravel()[0])
        assert val <= 1e-13 * (c * delta) ** 2 * diag[0]
    s1, s2, s3 = singular_values(tensor_of(np.diag([3.0, -2.0, 1.0])))
    got = (float(s1.ravel()[0]), float(s2.ravel()[0]), float(s3.ravel()[0]))
    assert got == pytest.approx((3.0, 2.0, 1.0), rel=1e-12)


def test_nut_nonnegative_on_many_tensors():
    rng = np.random.default_rng(5)
    c, delta, deltas = 0.17, 0.2, (0.2, 0.1, 0.3)
    arrs = rng.standard_normal((1000, 3, 3))
    arrs[::3, 2, :] = 0.0
    arrs[::3, :, 2] = 0.0
    t = GradientTensorField(None, arrs.reshape(1000, 1, 3, 3))
    for vals in model_values(t, c, delta, deltas, -2.5).values():
        assert np.all(vals >= 0.0)
        assert np.all(np.isfinite(vals))


def test_eddy_stress_divergence_zero_nut():
    rng = np.random.default_rng(6)
    g = make_grid((6, 5), stretched=True)
    bcs = periodic_bcs(2)
    u = rand_velocity(g, rng)
    fill_ghosts_velocity(u, bcs)
    out = eddy_stress_divergence(u, ScalarField(g))
    for a in range(2):
        assert np.all(out.u[a] == 0.0)


def test_eddy_stress_constant_nut_matches_loop_oracle():
    rng = np.random.default_rng(7)
    g = make_grid((6, 5), stretched=True)
    bcs = periodic_bcs(2)
    u = rand_velocity(g, rng)
    fill_ghosts_velocity(u, bcs)
    nut0 = 0.37
    nut = ScalarField(g)
    nut.interior[...] = nut0
    out = eddy_stress_divergence(u, nut)
    # scalar oracle: direct summation of the flux differences
    for a in range(2):
        sl = g.u_slices(a)
        for i in range(sl[0].start, sl[0].stop):
            for j in range(sl[1].start, sl[1].stop):
                idx = (i, j)
                total = 0.0
                for b in range(2):
                    if b == a:
                        def s_aa(ci, cj):
                            if a == 0:
                                return (u.u[0][ci, cj] - u.u[0][ci - 1, cj]) / g.dx[0][ci]
                            return (u.u[1][ci, cj] - u.u[1][ci, cj - 1]) / g.dx[1][cj]
                        if a == 0:
                            hi = 2 * nut0 * s_aa(i + 1, j)
                            lo = 2 * nut0 * s_aa(i, j)
                            total += (hi - lo) / g.du[0][i]
                        else:
                            hi = 2 * nut0 * s_aa(i, j + 1)
                            lo = 2 * nut0 * s_aa(i, j)
                            total += (hi - lo) / g.du[1][j]
                    else:
                        def s_ab(ci, cj):
                            a01 = (u.u[0][ci, cj + 1] - u.u[0][ci, cj]) / g.du[1][cj]
                            a10 = (u.u[1][ci + 1, cj] - u.u[1][ci, cj]) / g.du[0][ci]
                            return 0.5 * (a01 + a10)
                        if a == 0:
                            hi = 2 * nut0 * s_ab(i, j)
                            lo = 2 * nut0 * s_ab(i, j - 1)
                            total += (hi - lo) / g.dx[1][j]
                        else:
                            hi = 2 * nut0 * s_ab(i, j)
                            lo = 2 * nut0 * s_ab(i - 1, j)
                            total += (hi - lo) / g.dx[0][i]
                assert out.u[a][idx] == pytest.approx(total, rel=1e-11, abs=1e-12)


def test_eddy_stress_divergence_dissipative_dense():
    rng = np.random.default_rng(8)
    g = make_grid((5, 5), stretched=True)
    bcs = periodic_bcs(2)
    nut = ScalarField(g)
    nut.interior[...] = rng.uniform(0.05, 1.0, g.shape)
    mat = dense_vel_to_vel(g, bcs, lambda v: eddy_stress_divergence(v, nut))
    wu = np.concatenate([w.ravel() for w in velocity_weights(g)])
    m = wu[:, None] * mat
    assert np.linalg.norm(m - m.T) <= 1e-10 * np.linalg.norm(m)
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    assert eigs.max() <= 1e-10 * abs(eigs.min())


def test_eddy_stress_rejects_negative_nut():
    g = make_grid((5, 5))
    u = VelocityField(g)
    nut = ScalarField(g)
    nut.interior[0, 0] = -1.0
    with pytest.raises(ValueError):
        eddy_stress_divergence(u, nut)


def test_filter_width_rules():
    g = make_grid((6, 5), stretched=True)
    d = filter_width(g)
    p = g.p_slices()
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            expect = math.sqrt(g.dx[0][i + 1] * g.dx[1][j + 1])
            assert d[i, j] == pytest.approx(expect, rel=1e-13)
    per_axis = axis_widths(g)
    assert per_axis[0][2, 3] == g.dx[0][3]
    assert per_axis[1][2, 3] == g.dx[1][4]


def test_closure_model_dispatch_and_energy_sink():
    rng = np.random.default_rng(9)
    g = make_grid((8, 7), stretched=True)
    bcs = periodic_bcs(2)
    u = rand_velocity(g, rng)
    fill_ghosts_velocity(u, bcs)
    for kind in ("smagorinsky", "vreman", "qr", "wale", "sigma", "s3pqr"):
        m = ClosureModel(kind=kind)
        nut = m.nu_t(u)
        assert np.all(nut.interior >= 0)
        out = VelocityField(g)
        m.add_rhs(u, out, None)
        # frozen-coefficient contribution extracts resolved energy
        assert weighted_inner(u, out) <= 1e-12
    none = ClosureModel(kind="none")
    assert np.all(none.nu_t(u).interior == 0.0)
    with pytest.raises(Exception):
        ClosureModel(kind="unknown")
