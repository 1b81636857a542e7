"""Pressure Poisson solvers and the projection step.

The discrete pressure operator is the composition of the divergence and
pressure-gradient kernels (with their boundary fills); scaled by the
pressure volume measures it is symmetric and negative semi-definite with
the constants as null space.  All solvers remove the volume-weighted mean
of the right-hand side and return a pressure with exactly zero weighted
mean, which fixes the gauge and makes cross-solver comparisons exact.

Three interchangeable backends:

* spectral -- diagonalization by FFT; fully periodic uniform grids only.
* direct   -- sparse factorization of the zero-mean augmented system,
  assembled once by comb basis probing of the matrix-free kernel.
* cg       -- matrix-free conjugate gradient, fully preallocated.
"""

import itertools

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import transforms
from .bcs import BoundarySpec, Dirichlet
from .errors import ConfigurationError, ConvergenceError, NumericalError
from .fields import ScalarField, VelocityField, fill_ghosts_scalar, fill_ghosts_velocity
from .operators import KernelScratch, _table, divergence, pressure_weights, shifted


def homogeneous(bcs):
    """The boundary conditions satisfied by the pressure-correction field."""
    sides = []
    for lo, hi in bcs.sides:
        def _h(c):
            if isinstance(c, Dirichlet):
                return Dirichlet(0.0)
            return c
        sides.append((_h(lo), _h(hi)))
    return BoundarySpec(sides)


class _LaplacianApply:
    """Matrix-free action of the pressure operator on interior arrays."""

    def __init__(self, grid, bcs):
        self.grid = grid
        self.bcs = bcs
        self.hom = homogeneous(bcs)
        self.pf = ScalarField(grid)
        self.vf = VelocityField(grid)
        self.dv = ScalarField(grid)
        self.scratch = KernelScratch(grid)

    def __call__(self, p_int, out_int):
        grid = self.grid
        self.pf.data.fill(0.0)
        self.pf.interior[...] = p_int
        fill_ghosts_scalar(self.pf, self.bcs)
        for a in range(grid.dim):
            self.vf.u[a].fill(0.0)
            sl = grid.u_slices(a)
            g = self.vf.u[a][sl]
            np.subtract(self.pf.data[shifted(sl, a, 1)], self.pf.data[sl], out=g)
            g /= _table(grid, grid.du[a], a, sl[a])
        fill_ghosts_velocity(self.vf, self.hom)
        divergence(self.vf, out=self.dv, scratch=self.scratch)
        out_int[...] = self.dv.interior


def _comb_stride(n):
    # smallest stride >= 3 compatible with the one-cell stencil reach;
    # small or prime extents fall back to one probe line per offset
    if n < 3:
        return max(n, 1)
    for s in range(3, n + 1):
        if n % s == 0:
            return s
    return n


def assemble_weighted_laplacian(grid, bcs):
    """Dense-free assembly of the volume-weighted pressure operator.

    Basis probing with strided combs keeps the stencil kernels as the
    single source of truth: each comb of well-separated unit columns is
    pushed through the matrix-free operator and the responses are read
    off at the stencil offsets.
    """
    apply_l = _LaplacianApply(grid, bcs)
    w = pressure_weights(grid)
    shape = grid.shape
    d = grid.dim
    strides = [_comb_stride(n) for n in shape]
    e = np.zeros(shape, dtype=grid.dtype)
    resp = np.zeros(shape, dtype=grid.dtype)
    rows, cols, vals = [], [], []
    offsets = [np.zeros(d, dtype=int)]
    for a in range(d):
        for s in (-1, 1):
            o = np.zeros(d, dtype=int)
            o[a] = s
            offsets.append(o)
    for combo in itertools.product(*(range(s) for s in strides)):
        idx = [np.arange(o, n, s) for o, n, s in zip(combo, shape, strides)]
        if any(ix.size == 0 for ix in idx):
            continue
        e.fill(0.0)
        e[np.ix_(*idx)] = 1.0
        apply_l(e, resp)
        resp_w = resp * w
        cells = np.meshgrid(*idx, indexing="ij")
        cells = [c.ravel() for c in cells]
        for off in offsets:
            tgt = []
            ok = np.ones(cells[0].shape, dtype=bool)
            for a in range(d):
                ta = cells[a] + off[a]
                if grid.periodic[a]:
                    ta = ta % shape[a]
                else:
                    ok &= (ta >= 0) & (ta < shape[a])
                    ta = np.clip(ta, 0, shape[a] - 1)
                tgt.append(ta)
            if not ok.any():
                continue
            val = resp_w[tuple(t[ok] for t in tgt)]
            r = np.ravel_multi_index(tuple(t[ok] for t in tgt), shape)
            c = np.ravel_multi_index(tuple(cc[ok] for cc in cells), shape)
            rows.append(r)
            cols.append(c)
            vals.append(val)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    # wrapped offsets can hit the same entry more than once; each carries
    # the full summed coefficient, so keep a single copy
    key = rows.astype(np.int64) * int(np.prod(shape)) + cols
    _, keep = np.unique(key, return_index=True)
    n_dof = int(np.prod(shape))
    mat = sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(n_dof, n_dof)
    ).tocsr()
    return mat


def _wmean(arr, w, wtot):
    # both arrays contiguous: dot avoids a materialized product
    return float(np.dot(w.ravel(), arr.ravel()) / wtot)


class _SolverBase:
    kind = "base"

    def __init__(self, grid, bcs):
        self.grid = grid
        self.bcs = bcs
        self.weights = pressure_weights(grid)
        self.wtot = float(np.sum(self.weights))

    def solve(self, rhs):
        out = ScalarField(self.grid)
        self.solve_interior(rhs.interior, out.interior)
        return out


class SpectralPoissonSolver(_SolverBase):
    """FFT diagonalization; requires all axes periodic and uniform."""

    kind = "spectral"
    tolerance = 1e-12

    def __init__(self, grid, bcs):
        super().__init__(grid, bcs)
        if not all(grid.periodic):
            raise ConfigurationError("spectral pressure solver requires periodic axes")
        if not grid.uniform:
            raise ConfigurationError("spectral pressure solver requires uniform axes")
        lam = np.zeros(grid.shape)
        for a, n in enumerate(grid.shape):
            h = float(grid.axes[a].widths[0])
            k = np.arange(n)
            sym = (2.0 * np.cos(2.0 * np.pi * k / n) - 2.0) / h**2
            shape = [1] * grid.dim
            shape[a] = n
            lam = lam + sym.reshape(shape)
        # keep only the half-spectrum the real FFT produces
        half = list(grid.shape)
        half[-1] = grid.shape[-1] // 2 + 1
        lam = lam[tuple(slice(0, m) for m in half)].copy()
        lam[(0,) * grid.dim] = 1.0
        self._lam = lam.astype(grid.dtype)

    def solve_interior(self, rhs, out):
        mean = float(np.mean(rhs))
        rhat = transforms.rfftn(rhs - mean)
        rhat /= self._lam
        rhat[(0,) * self.grid.dim] = 0.0
        out[...] = transforms.irfftn(rhat, s=self.grid.shape)
        self.iterations = 1


class DirectPoissonSolver(_SolverBase):
    """Sparse factorization of the augmented zero-mean system, built once."""

    kind = "direct"
    tolerance = 1e-12

    def __init__(self, grid, bcs):
        super().__init__(grid, bcs)
        a_mat = assemble_weighted_laplacian(grid, bcs)
        n = a_mat.shape[0]
        wcol = sp.csr_matrix(self.weights.reshape(n, 1))
        aug = sp.bmat([[a_mat, wcol], [wcol.T, None]], format="csc")
        try:
            self._lu = splu(aug)
        except RuntimeError as exc:  # pragma: no cover
            raise NumericalError(f"augmented pressure matrix factorization failed: {exc}")
        self._rhs = np.zeros(n + 1)
        self._wr = np.zeros(grid.shape)

    def solve_interior(self, rhs, out):
        n = self._rhs.size - 1
        np.multiply(self.weights, rhs, out=self._wr)
        self._rhs[:n] = self._wr.ravel()
        self._rhs[n] = 0.0
        x = self._lu.solve(self._rhs)
        out[...] = x[:n].reshape(self.grid.shape)
        self.iterations = 1


class CGPoissonSolver(_SolverBase):
    """Matrix-free conjugate gradient on the weighted operator."""

    kind = "cg"

    def __init__(self, grid, bcs, tol=None, max_iter=None):
        super().__init__(grid, bcs)
        if tol is None:
            tol = 1e-10 if grid.dtype == np.float64 else 1e-5
        if tol <= 0:
            raise ValueError(f"tolerance must be positive, got {tol}")
        self.tol = float(tol)
        n_dof = int(np.prod(grid.shape))
        if max_iter is None:
            max_iter = min(10000, 10 * int(np.ceil(n_dof ** (1.0 / grid.dim))) + 10)
        self.max_iter = int(max_iter)
        self._apply = _LaplacianApply(grid, bcs)
        self._x = np.zeros(grid.shape, dtype=grid.dtype)
        self._r = np.zeros(grid.shape, dtype=grid.dtype)
        self._p = np.zeros(grid.shape, dtype=grid.dtype)
        self._ap = np.zeros(grid.shape, dtype=grid.dtype)
        self._t = np.zeros(grid.shape, dtype=grid.dtype)
        self.residual_history = []
        self.iterations = 0

    @property
    def tolerance(self):
        return self.tol

    def solve_interior(self, rhs, out):
        w, wtot = self.weights, self.wtot
        x, r, p, ap, t = self._x, self._r, self._p, self._ap, self._t
        # b = -W (rhs - mean): the weighted operator is negative, so flip
        # the sign to run CG on a positive definite system
        np.copyto(r, rhs)
        r -= _wmean(r, w, wtot)
        r *= w
        np.negative(r, out=r)
        b_norm = float(np.linalg.norm(r.ravel()))
        self.residual_history = [b_norm]
        x.fill(0.0)
        self.iterations = 0
        if b_norm == 0.0:
            out[...] = 0.0
            return
        p[...] = r
        rs = float(np.dot(r.ravel(), r.ravel()))
        for it in range(1, self.max_iter + 1):
            self._apply(p, ap)
            ap *= w
            np.negative(ap, out=ap)
            denom = float(np.dot(p.ravel(), ap.ravel()))
            if denom <= 0.0:
                raise NumericalError("pressure operator lost positive definiteness")
            alpha = rs / denom
            np.multiply(p, alpha, out=t)
            x += t
            x -= _wmean(x, w, wtot)
            ap *= alpha
            r -= ap
            r -= np.mean(r)
            res = float(np.linalg.norm(r.ravel()))
            self.residual_history.append(res)
            self.iterations = it
            if res <= self.tol * b_norm:
                np.copyto(out, x)
                return
            rs_new = float(np.dot(r.ravel(), r.ravel()))
            beta = rs_new / rs
            rs = rs_new
            p *= beta
            p += r
        raise ConvergenceError(
            f"pressure CG did not reach tol={self.tol} in {self.max_iter} iterations",
            residual=self.residual_history[-1] / b_norm,
            iterations=self.max_iter,
        )


def make_solver(kind, grid, bcs, tol=None, max_iter=None):
    if kind == "spectral":
        return SpectralPoissonSolver(grid, bcs)
    if kind == "direct":
        return DirectPoissonSolver(grid, bcs)
    if kind == "cg":
        return CGPoissonSolver(grid, bcs, tol=tol, max_iter=max_iter)
    raise ConfigurationError(f"unknown pressure solver kind: {kind!r}")


def project_into(u, solver, bcs, t=0.0, scratch=None, p_div=None, p_out=None):
    """Make ``u`` discretely divergence-free in place; returns the pressure."""
    grid = u.grid
    if scratch is None:
        scratch = KernelScratch(grid)
    if p_div is None:
        p_div = ScalarField(grid)
    if p_out is None:
        p_out = ScalarField(grid)
    fill_ghosts_velocity(u, bcs, t)
    divergence(u, out=p_div, scratch=scratch)
    solver.solve_interior(p_div.interior, p_out.interior)
    fill_ghosts_scalar(p_out, bcs)
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        g = scratch.w1[sl]
        np.subtract(p_out.data[shifted(sl, a, 1)], p_out.data[sl], out=g)
        g /= _table(grid, grid.du[a], a, sl[a])
        u.u[a][sl] -= g
    fill_ghosts_velocity(u, bcs, t)
    return p_out


def project(u, solver, bcs, t=0.0):
    """Pure projection: returns the corrected velocity and the pressure."""
    v = u.copy()
    p = project_into(v, solver, bcs, t=t)
    return v, p
