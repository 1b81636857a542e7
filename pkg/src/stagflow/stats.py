"""Plane-averaged turbulence statistics for wall-bounded flows.

Averages are taken over the homogeneous (periodic) planes at every
wall-normal volume, then over equispaced snapshots.  Fluctuations are
formed against each snapshot's own plane mean at the component's native
staggered location; cross-moments collocate the fluctuations at the
volume centers afterwards.
"""

from dataclasses import dataclass

import numpy as np

from .fields import fill_ghosts_velocity, interpolate_to_centers
from .poisson import homogeneous


@dataclass
class StatProfile:
    """One row per wall-normal volume; see ``column_names`` for layout."""

    y: np.ndarray
    y_plus: np.ndarray
    u_mean: np.ndarray          # (d, ny) mean of each component at centers
    rms: np.ndarray             # (d, ny) root-mean-square fluctuations
    u3: np.ndarray              # third moment of the streamwise fluctuation
    u4: np.ndarray              # fourth moment
    uuv: np.ndarray             # <u'u'v'> cross-moment at centers
    uw: np.ndarray              # <u'w'> cross-moment at centers
    nut_over_nu: np.ndarray
    u_tau: float
    n_snapshots: int

    def column_names(self):
        d = self.u_mean.shape[0]
        names = ["y", "y_plus"]
        names += [f"u{c}_mean" for c in range(d)]
        names += [f"u{c}_rms" for c in range(d)]
        names += ["u0_3rd", "u0_4th", "uuv", "uw", "nut_over_nu"]
        return names

    def rows(self):
        cols = [self.y, self.y_plus]
        cols += list(self.u_mean)
        cols += list(self.rms)
        cols += [self.u3, self.u4, self.uuv, self.uw, self.nut_over_nu]
        return np.stack(cols, axis=1)


def _plane_mean(arr, wall_axis):
    axes = tuple(a for a in range(arr.ndim) if a != wall_axis)
    return arr.mean(axis=axes)


def accumulate_stats(snapshots, bcs, nu, wall_axis=1, nut_snapshots=None):
    """Reduce velocity snapshots to a wall-normal statistics profile.

    ``snapshots`` is a sequence of velocity fields on a common grid with
    two homogeneous (periodic) directions.  ``nut_snapshots`` optionally
    supplies matching eddy-viscosity fields.
    """
    snapshots = list(snapshots)
    if len(snapshots) < 2:
        raise ValueError("need at least two snapshots to average")
    grid = snapshots[0].grid
    d = grid.dim
    ny = grid.shape[wall_axis]
    hom = homogeneous(bcs)

    per_mean = []
    per_rms = []
    per_u3 = []
    per_u4 = []
    per_uuv = []
    per_uw = []
    for snap in snapshots:
        up = snap.copy()
        fill_ghosts_velocity(up, bcs)
        means = []
        for a in range(d):
            sl = grid.u_slices(a)
            m_native = _plane_mean(up.u[a][sl], wall_axis)
            # subtract the interior plane mean at every wall-normal index
            # (ghost planes are refilled below, so the fluctuation field
            # stays consistent for the center interpolation)
            hsl = list(grid.p_slices())
            hsl[wall_axis] = slice(None)
            full_mean = _plane_mean(up.u[a][tuple(hsl)], wall_axis)
            shape = [1] * d
            shape[wall_axis] = up.u[a].shape[wall_axis]
            up.u[a] -= full_mean.reshape(shape)
            means.append(m_native)
        fill_ghosts_velocity(up, hom)
        centered = interpolate_to_centers(up)

        mean_profile = np.zeros((d, ny))
        rms_profile = np.zeros((d, ny))
        for a in range(d):
            if a == wall_axis:
                # native location is the face lattice; report at centers
                mean_face = means[a]
                if mean_face.shape[0] == ny:
                    mean_profile[a] = mean_face  # periodic wall axis
                else:
                    mean_profile[a] = 0.5 * (
                        np.concatenate(([0.0], mean_face))
                        + np.concatenate((mean_face, [0.0]))
                    )
                # the wall-normal component must be collocated first
                rms_profile[a] = np.sqrt(_plane_mean(centered[a] ** 2, wall_axis))
            else:
                mean_profile[a] = means[a]
                sl = grid.u_slices(a)
                rms_profile[a] = np.sqrt(_plane_mean(up.u[a][sl] ** 2, wall_axis))
        sl0 = grid.u_slices(0)
        u0p = up.u[0][sl0]
        per_u3.append(_plane_mean(u0p**3, wall_axis))
        per_u4.append(_plane_mean(u0p**4, wall_axis))
        per_uuv.append(
            _plane_mean(centered[0] * centered[0] * centered[wall_axis], wall_axis)
        )
        other = 2 if d == 3 else 1
        per_uw.append(_plane_mean(centered[0] * centered[other], wall_axis))
        per_mean.append(mean_profile)
        per_rms.append(rms_profile)

    def _tmean(parts):
        # extended-precision accumulation keeps the time average
        # independent of the snapshot ordering to the last bits
        acc = np.sum(np.stack(parts).astype(np.longdouble), axis=0)
        return (acc / len(parts)).astype(np.float64)

    u_mean = _tmean(per_mean)
    rms = _tmean(per_rms)
    u3 = _tmean(per_u3)
    u4 = _tmean(per_u4)
    uuv = _tmean(per_uuv)
    uw = _tmean(per_uw)

    if nut_snapshots:
        prof = [
            _plane_mean(f.interior, wall_axis) for f in nut_snapshots
        ]
        nut_over_nu = _tmean(prof) / nu
    else:
        nut_over_nu = np.zeros(ny)

    y = np.asarray(grid.axes[wall_axis].centers, dtype=np.float64)
    # one-sided wall gradient of the mean streamwise velocity from the
    # first off-wall point (reported, not asserted)
    du_dy = u_mean[0][0] / y[0]
    u_tau = float(np.sqrt(nu * max(du_dy, 0.0)))
    # wall-unit scaling under the unit-friction-velocity convention
    y_plus = y / nu
    return StatProfile(
        y=y,
        y_plus=y_plus,
        u_mean=u_mean,
        rms=rms,
        u3=u3,
        u4=u4,
        uuv=uuv,
        uw=uw,
        nut_over_nu=nut_over_nu,
        u_tau=u_tau,
        n_snapshots=len(snapshots),
    )


def write_profile_csv(path, profile):
    """Emit a statistics profile: one row per wall-normal point."""
    from .csvio import write_csv

    names = profile.column_names()
    rows = []
    for r in profile.rows():
        rows.append({name: float(v) for name, v in zip(names, r)})
    write_csv(path, "stat-profile", names, rows)


def write_snapshot(path_base, u, t):
    """Raw little-endian dump of the extended component arrays plus a
    text sidecar recording dims, dtype, and time.  Both files are written
    atomically (temp file, then rename)."""
    import os
    import tempfile

    from .csvio import atomic_write_text

    comps = [np.ascontiguousarray(c, dtype=c.dtype.newbyteorder("<")) for c in u.u]
    target = str(path_base) + ".bin"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(target)),
                               prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            for c in comps:
                c.tofile(fh)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    lines = [
        f"time {t!r}",
        f"dtype {u.u[0].dtype.name}",
        f"components {len(comps)}",
    ]
    for i, c in enumerate(comps):
        lines.append(f"shape{i} " + " ".join(str(s) for s in c.shape))
    atomic_write_text(str(path_base) + ".txt", "\n".join(lines) + "\n")


def read_snapshot(path_base):
    """Inverse of :func:`write_snapshot`; returns (arrays, time)."""
    meta = {}
    with open(str(path_base) + ".txt") as fh:
        for line in fh:
            key, _, rest = line.strip().partition(" ")
            meta[key] = rest
    dtype = np.dtype(meta["dtype"]).newbyteorder("<")
    n = int(meta["components"])
    shapes = [tuple(int(s) for s in meta[f"shape{i}"].split()) for i in range(n)]
    arrays = []
    with open(str(path_base) + ".bin", "rb") as fh:
        for shape in shapes:
            count = int(np.prod(shape))
            arrays.append(np.fromfile(fh, dtype=dtype, count=count).reshape(shape))
    return arrays, float(meta["time"])
