"""Boundary condition declarations.

A :class:`BoundarySpec` assigns one condition per axis per side:

* ``Periodic``   -- the solution wraps around; must be declared on both
  sides of an axis or on neither.
* ``Dirichlet``  -- prescribed velocity on the boundary, possibly varying
  in space and time.  The value is a constant vector or a callable
  ``f(component, *coords, t) -> array``.
* ``Symmetric``  -- zero normal velocity, zero normal gradient of the
  tangential components.

Pressure carries no condition of its own; ghost values are filled with a
zero-normal-gradient copy on non-periodic axes.
"""

from dataclasses import dataclass

import numpy as np


class Periodic:
    def __repr__(self):
        return "Periodic()"


@dataclass
class Dirichlet:
    """Prescribed velocity.  ``values`` is a d-vector of constants or a
    callable ``f(component, *coords, t)`` evaluated lazily at fill time."""

    values: object = 0.0

    def component_value(self, component):
        """Constant value of one component (callable values are evaluated
        with coordinates by the ghost fill instead)."""
        if np.isscalar(self.values):
            return self.values
        return self.values[component]


class Symmetric:
    def __repr__(self):
        return "Symmetric()"


class BoundarySpec:
    """Per-axis, per-side boundary conditions for a d-dimensional box."""

    def __init__(self, sides):
        # sides: sequence of (lo, hi) condition pairs, one per axis
        self.sides = tuple((lo, hi) for lo, hi in sides)
        for ax, (lo, hi) in enumerate(self.sides):
            if isinstance(lo, Periodic) != isinstance(hi, Periodic):
                raise ValueError(
                    f"axis {ax}: periodic must be declared on both sides or neither"
                )

    @property
    def dim(self):
        return len(self.sides)

    def is_periodic(self, axis):
        return isinstance(self.sides[axis][0], Periodic)

    @property
    def periodic(self):
        return tuple(self.is_periodic(a) for a in range(self.dim))

    @classmethod
    def all_periodic(cls, dim):
        return cls([(Periodic(), Periodic()) for _ in range(dim)])

    @classmethod
    def channel(cls, dim=3, wall_axis=1, value=0.0):
        """Periodic everywhere except no-slip Dirichlet walls on one axis."""
        sides = []
        for a in range(dim):
            if a == wall_axis:
                sides.append((Dirichlet(value), Dirichlet(value)))
            else:
                sides.append((Periodic(), Periodic()))
        return cls(sides)
