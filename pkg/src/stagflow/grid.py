"""Staggered Cartesian grids: 1D coordinate profiles and d-dimensional assembly.

Storage convention
------------------
Arrays carry one ghost layer per side.  On an axis with ``n`` volumes the
extended extent is ``n + 2`` and array index ``i`` refers to

* volume ``i`` spanning ``[x[i-1], x[i]]`` for interior ``i = 1..n``
  (pressure and volume-centered quantities live at its center), and
* the face ``x[i]`` on its right (the canonical slot of the velocity
  component along that axis).

``dx[i]`` is the width of volume ``i``; ``du[i]`` is the distance between
the centers of volumes ``i`` and ``i+1``, i.e. the width of the staggered
control volume around face ``i``.  Ghost widths mirror the opposite-side
interior widths on periodic axes and the adjacent interior width otherwise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class AxisCoords:
    """Monotone volume boundaries with derived widths and centers."""

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("need at least two boundary coordinates")
        if not np.all(np.diff(b) > 0):
            raise ValueError("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @property
    def n(self):
        return self.boundaries.size - 1

    @property
    def widths(self):
        return np.diff(self.boundaries)

    @property
    def centers(self):
        return 0.5 * (self.boundaries[:-1] + self.boundaries[1:])

    @property
    def a(self):
        return self.boundaries[0]

    @property
    def b(self):
        return self.boundaries[-1]


def _check_interval(a, b, n):
    if n < 1:
        raise ValueError(f"need at least one volume, got n={n}")
    if not a < b:
        raise ValueError(f"invalid interval: a={a} must be < b={b}")


def uniform_grid(a, b, n):
    """Equispaced profile of ``n`` volumes on ``[a, b]``."""
    _check_interval(a, b, n)
    return AxisCoords(np.linspace(a, b, n + 1))


def cosine_grid(a, b, n):
    """Profile clustering volumes near both ends of ``[a, b]``."""
    _check_interval(a, b, n)
    i = np.arange(n + 1)
    x = a + (1.0 - np.cos(np.pi * i / n)) / 2.0 * (b - a)
    x[0], x[-1] = a, b
    return AxisCoords(x)


def tanh_grid(a, b, n, gamma):
    """Symmetric hyperbolic-tangent stretching; ``gamma`` sets the strength."""
    _check_interval(a, b, n)
    if gamma <= 0:
        raise ValueError(f"stretching parameter must be positive, got {gamma}")
    xi = np.arange(n + 1) / n
    x = a + (b - a) / 2.0 * (1.0 + np.tanh(gamma * (2.0 * xi - 1.0)) / np.tanh(gamma))
    x[0], x[-1] = a, b
    return AxisCoords(x)


def stretched_grid(a, b, n, s):
    """Geometric stretching with ratio ``s`` clustering near one end."""
    _check_interval(a, b, n)
    if s <= 0:
        raise ValueError(f"stretch ratio must be positive, got {s}")
    if s == 1.0:
        return uniform_grid(a, b, n)
    i = np.arange(n + 1)
    x = a + (b - a) * (1.0 - s ** i) / (1.0 - float(s) ** n)
    x[0], x[-1] = a, b
    return AxisCoords(x)


PROFILES = {
    "uniform": uniform_grid,
    "cosine": cosine_grid,
    "tanh": tanh_grid,
    "stretched": stretched_grid,
}


class Grid:
    """Immutable d-dimensional staggered grid with ghost metadata.

    Attributes
    ----------
    dx : per-axis extended volume widths, length ``n + 2``.
    du : per-axis extended staggered widths (center-to-center distances
        across face ``i``), length ``n + 2``.
    xb : per-axis extended face coordinates (``xb[i]`` is face ``i``).
    xc : per-axis extended volume-center coordinates.
    """

    def __init__(self, axes, periodic, dtype=np.float64):
        if not 2 <= len(axes) <= 3:
            raise ConfigurationError(f"unsupported dimension {len(axes)}; need 2 or 3")
        if len(periodic) != len(axes):
            raise ValueError("one periodic flag per axis required")
        self.axes = tuple(axes)
        self.periodic = tuple(bool(p) for p in periodic)
        self.dtype = np.dtype(dtype)
        self.dim = len(axes)
        self.shape = tuple(ax.n for ax in axes)
        self.ext_shape = tuple(ax.n + 2 for ax in axes)

        self.dx = []
        self.du = []
        self.xb = []
        self.xc = []
        for ax, per in zip(self.axes, self.periodic):
            n = ax.n
            w = ax.widths
            dx = np.empty(n + 2)
            dx[1 : n + 1] = w
            if per:
                dx[0] = w[-1]
                dx[n + 1] = w[0]
                beyond = w[1 % n]
            else:
                dx[0] = w[0]
                dx[n + 1] = w[-1]
                beyond = w[-1]
            du = np.empty(n + 2)
            du[: n + 1] = 0.5 * (dx[: n + 1] + dx[1 : n + 2])
            du[n + 1] = 0.5 * (dx[n + 1] + beyond)

            xb = np.empty(n + 2)
            xb[: n + 1] = ax.boundaries
            xb[n + 1] = ax.boundaries[-1] + dx[n + 1]
            xc = np.empty(n + 2)
            xc[1 : n + 1] = ax.centers
            xc[0] = ax.boundaries[0] - 0.5 * dx[0]
            xc[n + 1] = ax.boundaries[-1] + 0.5 * dx[n + 1]

            self.dx.append(dx.astype(self.dtype))
            self.du.append(du.astype(self.dtype))
            self.xb.append(xb.astype(self.dtype))
            self.xc.append(xc.astype(self.dtype))

        for arr in (*self.dx, *self.du, *self.xb, *self.xc):
            arr.flags.writeable = False
        self._stencils = None

    @property
    def uniform(self):
        # tolerate the last-bits spread of linspace-generated boundaries
        return all(
            np.allclose(ax.widths, ax.widths[0], rtol=1e-12, atol=0.0)
            for ax in self.axes
        )

    def broadcast(self, values, axis):
        """View a per-axis 1D table so it broadcasts along ``axis``."""
        shape = [1] * self.dim
        shape[axis] = values.shape[0]
        return values.reshape(shape)

    # --- degree-of-freedom index ranges -------------------------------

    def p_slices(self):
        """Interior pressure range (volumes 1..n on every axis)."""
        return tuple(slice(1, n + 1) for n in self.shape)

    def u_slices(self, component):
        """Interior DOF range of velocity component ``component``.

        On a non-periodic axis the component normal to it excludes the
        boundary faces (those hold prescribed values, not unknowns).
        """
        out = []
        for a, n in enumerate(self.shape):
            if a == component and not self.periodic[a]:
                out.append(slice(1, n))
            else:
                out.append(slice(1, n + 1))
        return tuple(out)

    def face_coords(self, component):
        """Extended coordinate vectors at the canonical points of a component
        (faces along its own axis, centers along the others)."""
        return [
            self.xb[a] if a == component else self.xc[a] for a in range(self.dim)
        ]


def build_grid(axes, bcs, dtype=np.float64):
    """Assemble a :class:`Grid` whose ghost bookkeeping matches ``bcs``."""
    if len(axes) != bcs.dim:
        raise ValueError("axis count and boundary spec dimension differ")
    return Grid(axes, bcs.periodic, dtype=dtype)
