"""Velocity-gradient invariants and eddy-viscosity closure models.

The velocity gradient is collocated at the pressure points (diagonal
entries natively, off-diagonal entries by a four-point average of the
surrounding corner values) and embedded in 3x3 form so two-dimensional
fields are treated as two-component flows.  Every model returns a
pointwise nonnegative eddy viscosity and resolves its degenerate
denominators to zero rather than epsilon-flooring them; the numerators
vanish at least as fast in each case.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fields import ScalarField
from .operators import _table, shifted


@dataclass
class Invariants:
    """Pointwise rotation invariants of the velocity gradient tensor."""

    q_a: np.ndarray
    q_s: np.ndarray
    q_w: np.ndarray
    r_s: np.ndarray
    r_a: np.ndarray
    v2: np.ndarray
    p_aa: np.ndarray
    q_aa: np.ndarray
    r_aa: np.ndarray


class GradientTensorField:
    """Velocity gradient at pressure points, stored as (..., 3, 3)."""

    def __init__(self, grid, a):
        self.grid = grid
        self.a = a
        self._inv = None

    @property
    def sym(self):
        return 0.5 * (self.a + np.swapaxes(self.a, -1, -2))

    @property
    def antisym(self):
        return 0.5 * (self.a - np.swapaxes(self.a, -1, -2))

    def invariants(self):
        if self._inv is None:
            self._inv = invariants(self)
        return self._inv


def gradient_at_centers(u):
    """Collocated velocity gradient tensor; requires filled ghosts."""
    grid = u.grid
    d = grid.dim
    p = grid.p_slices()
    a = np.zeros(grid.shape + (3, 3), dtype=grid.dtype)
    for i in range(d):
        lo = shifted(p, i, -1)
        a[..., i, i] = (u.u[i][p] - u.u[i][lo]) / _table(grid, grid.dx[i], i, p[i])
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            # corner values of d u_i / d x_j on the (i, j) face lattice
            csl = list(p)
            csl[i] = slice(0, grid.shape[i] + 1)
            csl[j] = slice(0, grid.shape[j] + 1)
            csl = tuple(csl)
            corner = (u.u[i][shifted(csl, j, 1)] - u.u[i][csl]) / _table(
                grid, grid.du[j], j, csl[j]
            )
            acc = None
            for di in (0, 1):
                for dj in (0, 1):
                    sl = [slice(None)] * grid.dim
                    sl[i] = slice(di, grid.shape[i] + di)
                    sl[j] = slice(dj, grid.shape[j] + dj)
                    part = corner[tuple(sl)]
                    acc = part if acc is None else acc + part
            a[..., i, j] = 0.25 * acc
    return GradientTensorField(grid, a)


def invariants(tensor):
    """All scalar invariants the closure models consume."""
    a = tensor.a
    s = 0.5 * (a + np.swapaxes(a, -1, -2))
    w = 0.5 * (a - np.swapaxes(a, -1, -2))
    q_a = -0.5 * np.einsum("...ij,...ji->...", a, a)
    q_s = -0.5 * np.einsum("...ij,...ji->...", s, s)
    q_w = -0.5 * np.einsum("...ij,...ji->...", w, w)
    r_s = np.einsum("...ij,...jk,...ki->...", s, s, s) / 3.0
    # structurally two-component tensors (zero third row and column) admit
    # the closed form t(t^2 - 3 det2)/3, which vanishes exactly when the
    # in-plane trace does
    two_c = np.all(a[..., 2, :] == 0.0, axis=-1) & np.all(a[..., :, 2] == 0.0, axis=-1)
    if np.any(two_c):
        t2 = s[..., 0, 0] + s[..., 1, 1]
        det2 = s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] * s[..., 1, 0]
        r_s = np.where(two_c, t2 * (t2 * t2 - 3.0 * det2) / 3.0, r_s)
    r_a = np.einsum("...ij,...jk,...ki->...", a, a, a) / 3.0
    # 4*(tr(S^2 W^2) - 2 Q_S Q_W) equals 4*|S w|^2 with w the axial vector
    # of W; the squared form avoids the cancellation of the trace form
    omega = np.stack((w[..., 2, 1], w[..., 0, 2], w[..., 1, 0]), axis=-1)
    s_omega = np.einsum("...ij,...j->...i", s, omega)
    v2 = 4.0 * np.einsum("...i,...i->...", s_omega, s_omega)
    p_aa = np.einsum("...ij,...ij->...", a, a)
    q_aa = v2 + q_a * q_a
    r_aa = r_a * r_a
    return Invariants(q_a, q_s, q_w, r_s, r_a, v2, p_aa, q_aa, r_aa)


def _sym3_eigvals(m):
    """Closed-form eigenvalues of symmetric 3x3 tensors, descending."""
    m00, m11, m22 = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]
    m01, m02, m12 = m[..., 0, 1], m[..., 0, 2], m[..., 1, 2]
    p1 = m01**2 + m02**2 + m12**2
    q = (m00 + m11 + m22) / 3.0
    p2 = (m00 - q) ** 2 + (m11 - q) ** 2 + (m22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    safe = p > 0
    ps = np.where(safe, p, 1.0)
    b00, b11, b22 = (m00 - q) / ps, (m11 - q) / ps, (m22 - q) / ps
    b01, b02, b12 = m01 / ps, m02 / ps, m12 / ps
    detb = (
        b00 * (b11 * b22 - b12 * b12)
        - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02)
    )
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    e1 = np.where(safe, e1, q)
    e2 = np.where(safe, e2, q)
    e3 = np.where(safe, e3, q)
    return e1, e2, e3


def _det3(a):
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


def singular_values(tensor):
    """Singular values of the gradient tensor, descending, clamped >= 0.

    The two leading values come from the closed-form eigenvalues of A^T A
    (evaluated in extended precision to offset the squaring); the smallest
    is recovered from the determinant product, which keeps its relative
    accuracy and is exactly zero for two-component tensors.
    """
    a = tensor.a.astype(np.longdouble)
    ata = np.einsum("...ki,...kj->...ij", a, a)
    e1, e2, _ = _sym3_eigvals(ata)
    s1 = np.sqrt(np.maximum(e1, 0.0)).astype(np.float64)
    s2 = np.sqrt(np.maximum(e2, 0.0)).astype(np.float64)
    det = np.abs(_det3(a)).astype(np.float64)
    prod = s1 * s2
    s3 = np.where(prod > 0.0, det / np.where(prod > 0.0, prod, 1.0), 0.0)
    s3 = np.minimum(s3, s2)
    return s1, s2, s3


def nut_smagorinsky(tensor, c, delta):
    inv = tensor.invariants()
    return (c * delta) ** 2 * np.sqrt(np.maximum(-4.0 * inv.q_s, 0.0))


def nut_vreman(tensor, c, deltas):
    """`deltas` are the per-axis filter widths (anisotropy enters here);
    the constant multiplies without a filter-width factor of its own."""
    a = tensor.a
    dm = np.zeros(a.shape[:-2] + (3,), dtype=a.dtype)
    for m, d in enumerate(deltas):
        dm[..., m] = d
    # with rows c_i = Delta_m A_im, the sum of 2x2 principal minors of
    # beta = c c^T is sum_{i<j} |c_i x c_j|^2 (Lagrange identity), a form
    # free of the minors' cancellation
    rows = a * dm[..., None, :]
    b = np.zeros(a.shape[:-2], dtype=a.dtype)
    for i in range(3):
        for j in range(i + 1, 3):
            cr = np.cross(rows[..., i, :], rows[..., j, :])
            b = b + np.einsum("...k,...k->...", cr, cr)
    denom = tensor.invariants().p_aa / 2.0
    safe = denom > 0
    val = np.sqrt(b / np.where(safe, denom, 1.0))
    return c**2 * np.where(safe, val, 0.0)


def nut_qr(tensor, c, delta):
    inv = tensor.invariants()
    safe = inv.q_s < 0
    return (c * delta) ** 2 * np.where(
        safe, np.abs(inv.r_s) / np.where(safe, -inv.q_s, 1.0), 0.0
    )


def nut_wale(tensor, c, delta):
    a = tensor.a
    a2 = np.einsum("...ij,...jk->...ik", a, a)
    sd = 0.5 * (a2 + np.swapaxes(a2, -1, -2))
    tr = np.einsum("...ii->...", sd)
    for i in range(3):
        sd[..., i, i] -= tr / 3.0
    sdsd = np.einsum("...ij,...ij->...", sd, sd)
    s = tensor.sym
    ss = np.einsum("...ij,...ij->...", s, s)
    denom = ss ** 2.5 + sdsd ** 1.25
    safe = denom > 0
    return (c * delta) ** 2 * np.where(
        safe, sdsd ** 1.5 / np.where(safe, denom, 1.0), 0.0
    )



def nut_sigma(tensor, c, delta):
    s1, s2, s3 = singular_values(tensor)
    safe = s1 > 0
    val = s3 * (s1 - s2) * (s2 - s3) / np.where(safe, s1**2, 1.0)
    return (c * delta) ** 2 * np.where(safe, np.maximum(val, 0.0), 0.0)


def _safe_pow(x, e, degenerate):
    if e == 0.0:
        return np.ones_like(x), degenerate
    pos = x > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(pos, x, 1.0) ** e
    if e < 0:
        degenerate = degenerate | ~pos
    return np.where(pos, val, 0.0), degenerate


def nut_s3pqr(tensor, c, delta, p=-2.5):
    inv = tensor.invariants()
    degenerate = np.zeros(inv.p_aa.shape, dtype=bool)
    f1, degenerate = _safe_pow(inv.p_aa, p, degenerate)
    f2, degenerate = _safe_pow(inv.q_aa, -(p + 1.0), degenerate)
    f3, degenerate = _safe_pow(inv.r_aa, (p + 2.5) / 3.0, degenerate)
    return (c * delta) ** 2 * np.where(degenerate, 0.0, f1 * f2 * f3)


def filter_width(grid, rule="geometric"):
    """Local filter width at the pressure points."""
    p = grid.p_slices()
    if rule != "geometric":
        raise ConfigurationError(f"unknown filter width rule: {rule!r}")
    prod = np.ones((1,) * grid.dim, dtype=grid.dtype)
    for a in range(grid.dim):
        prod = prod * _table(grid, grid.dx[a], a, p[a])
    return np.ascontiguousarray(np.broadcast_to(prod, grid.shape)) ** (1.0 / grid.dim)


def axis_widths(grid):
    """Per-axis local widths at the pressure points (for the anisotropic
    model)."""
    p = grid.p_slices()
    return [
        np.ascontiguousarray(
            np.broadcast_to(_table(grid, grid.dx[a], a, p[a]), grid.shape)
        )
        for a in range(grid.dim)
    ]


# proposed constants; wall-resolved channel studies often use smaller
# values (e.g. C_S = 0.1, C_W = 0.5), set per run through the config
MODEL_CONSTANTS = {
    "smagorinsky": 0.17,
    "vreman": float(np.sqrt(2.5 * 0.17**2)),
    "qr": float(np.sqrt(1.5) / np.pi),
    "wale": float(np.sqrt(2.5 * 0.17)),
    "sigma": 1.35,
    "s3pqr": 0.762,
}


class ClosureModel:
    """Eddy-viscosity closure: kind, constant, filter rule, family exponent."""

    KINDS = ("none", "smagorinsky", "vreman", "qr", "wale", "sigma", "s3pqr")

    def __init__(self, kind="none", c=None, filter_rule="geometric", p=-2.5):
        if kind not in self.KINDS:
            raise ConfigurationError(f"unknown closure kind: {kind!r}")
        self.kind = kind
        self.c = float(MODEL_CONSTANTS.get(kind, 0.0) if c is None else c)
        if self.c < 0:
            raise ValueError("closure constant must be nonnegative")
        self.filter_rule = filter_rule
        self.p = float(p)
        self._delta = None
        self._deltas = None

    def _bind(self, grid):
        if self._delta is None:
            self._delta = filter_width(grid, self.filter_rule)
            self._deltas = axis_widths(grid)

    def nu_t(self, u):
        """Eddy viscosity field from the current velocity (filled ghosts)."""
        grid = u.grid
        out = ScalarField(grid)
        if self.kind == "none":
            return out
        self._bind(grid)
        g = gradient_at_centers(u)
        if self.kind == "smagorinsky":
            val = nut_smagorinsky(g, self.c, self._delta)
        elif self.kind == "vreman":
            val = nut_vreman(g, self.c, self._deltas)
        elif self.kind == "qr":
            val = nut_qr(g, self.c, self._delta)
        elif self.kind == "wale":
            val = nut_wale(g, self.c, self._delta)
        elif self.kind == "sigma":
            val = nut_sigma(g, self.c, self._delta)
        else:
            val = nut_s3pqr(g, self.c, self._delta, self.p)
        out.interior[...] = val
        return out

    def add_rhs(self, u, out, scratch):
        if self.kind == "none":
            return
        nut = self.nu_t(u)
        eddy_stress_divergence(u, nut, out=out, scratch=scratch, accumulate=True)


def eddy_stress_divergence(u, nut, out=None, scratch=None, accumulate=False):
    """Divergence of the modeled stress 2*nu_t*S, oriented so the term
    dissipates resolved energy when added to the momentum right-hand side.

    nu_t is used natively at the centers for the diagonal entries and by a
    four-point average of the surrounding pressure points at the corners.
    """
    from .fields import VelocityField
    from .operators import KernelScratch

    grid = u.grid
    if out is None:
        out = VelocityField(grid)
    if scratch is None:
        scratch = KernelScratch(grid)
    if np.any(nut.interior < 0):
        raise ValueError("eddy viscosity must be nonnegative")
    fill_ghosts_scalar_like_pressure(nut)
    d = grid.dim
    for a in range(d):
        sl = grid.u_slices(a)
        if not accumulate:
            out.u[a].fill(0.0)
        for b in range(d):
            if b == a:
                # center flux 2 nu_t A_aa on centers sl_a .. sl_a + 1
                csl = list(sl)
                csl[a] = slice(sl[a].start, sl[a].stop + 1)
                csl = tuple(csl)
                g = scratch.w1[csl]
                np.subtract(u.u[a][csl], u.u[a][shifted(csl, a, -1)], out=g)
                g /= _table(grid, grid.dx[a], a, csl[a])
                g *= nut.data[csl]
                g *= 2.0
                hi = list(csl)
                hi[a] = slice(sl[a].start + 1, sl[a].stop + 1)
                lo = list(csl)
                lo[a] = slice(sl[a].start, sl[a].stop)
                t = scratch.w2[sl]
                np.subtract(scratch.w1[tuple(hi)], scratch.w1[tuple(lo)], out=t)
                t /= _table(grid, grid.du[a], a, sl[a])
                out.u[a][sl] += t
            else:
                # corner flux 2 nu_t S_ab on corners sl_b - 1 .. sl_b
                csl = list(sl)
                csl[b] = slice(sl[b].start - 1, sl[b].stop)
                csl = tuple(csl)
                sab = scratch.w1[csl]
                np.subtract(u.u[a][shifted(csl, b, 1)], u.u[a][csl], out=sab)
                sab /= _table(grid, grid.du[b], b, csl[b])
                t = scratch.w2[csl]
                np.subtract(u.u[b][shifted(csl, a, 1)], u.u[b][csl], out=t)
                t /= _table(grid, grid.du[a], a, csl[a])
                sab += t
                # sab now holds 2*S_ab at the corners
                nc = scratch.w3[csl]
                np.add(nut.data[csl], nut.data[shifted(csl, a, 1)], out=nc)
                t2 = scratch.w4[csl]
                np.add(nut.data[shifted(csl, b, 1)],
                       nut.data[shifted(shifted(csl, a, 1), b, 1)], out=t2)
                nc += t2
                nc *= 0.25
                sab *= nc
                hi = list(csl)
                hi[b] = slice(sl[b].start, sl[b].stop)
                lo = list(csl)
                lo[b] = slice(sl[b].start - 1, sl[b].stop - 1)
                t3 = scratch.w2[sl]
                np.subtract(scratch.w1[tuple(hi)], scratch.w1[tuple(lo)], out=t3)
                t3 /= _table(grid, grid.dx[b], b, sl[b])
                out.u[a][sl] += t3
    return out


def fill_ghosts_scalar_like_pressure(f):
    """Zero-normal-gradient / wrap ghost fill driven by the grid's
    periodicity flags (the eddy viscosity carries no condition of its own)."""
    grid = f.grid
    d = grid.dim
    for a, n in enumerate(grid.shape):
        sl0 = [slice(None)] * d
        sln = [slice(None)] * d
        sl0[a], sln[a] = 0, n + 1
        src0 = [slice(None)] * d
        srcn = [slice(None)] * d
        if grid.periodic[a]:
            src0[a], srcn[a] = n, 1
        else:
            src0[a], srcn[a] = 1, n
        f.data[tuple(sl0)] = f.data[tuple(src0)]
        f.data[tuple(sln)] = f.data[tuple(srcn)]
    return f
