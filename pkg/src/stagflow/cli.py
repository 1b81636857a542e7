"""Batch driver: run one study from a configuration file.

Usage::

    stagflow run experiment.ini [--set section.key=value ...]
    stagflow --version

Each run writes into the configured output directory: ``results.csv``
(study-specific schema, first line a schema-version comment),
``effective_config.ini`` (the complete default-filled configuration; a
rerun from it reproduces every output byte for byte), and ``run.log``.
All files are written atomically (temp file, then rename).  Exit codes:
0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .bcs import BoundarySpec, Dirichlet, Periodic, Symmetric
from .cases import (
    channel_setup,
    convergence_study,
    fd_vcurve,
    taylor_green,
)
from .checks import adjoint_check_rows
from .config import emit_config, parse_config
from .csvio import atomic_write_text, write_csv
from .errors import ConfigurationError, ConvergenceError, NumericalError
from .grid import PROFILES, build_grid
from .les import ClosureModel
from .operators import divergence, kinetic_energy
from .stats import accumulate_stats, write_profile_csv, write_snapshot
from .timestep import Setup, run_steps, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger("stagflow")


def _axis_from_config(cfg, ax):
    kind = cfg.get("grid", f"{ax}_kind")
    a = cfg.get("grid", f"{ax}_a")
    b = cfg.get("grid", f"{ax}_b")
    n = cfg.get("grid", f"{ax}_n")
    fn = PROFILES[kind]
    if kind == "tanh":
        return fn(a, b, n, cfg.get("grid", f"{ax}_gamma"))
    if kind == "stretched":
        return fn(a, b, n, cfg.get("grid", f"{ax}_s"))
    return fn(a, b, n)


def _bc_from_config(cfg, ax):
    kind = cfg.get("bc", ax)
    if kind == "periodic":
        return (Periodic(), Periodic())
    if kind == "symmetric":
        return (Symmetric(), Symmetric())
    if cfg.get("bc", "dirichlet_value") == "constant":
        value = cfg.get("bc", "constant_u")
    else:
        value = 0.0
    return (Dirichlet(value), Dirichlet(value))


def build_setup(cfg):
    """Construct the simulation objects a config describes."""
    dim = cfg.get("grid", "dim")
    dtype = np.float32 if cfg.get("run", "precision") == "f32" else np.float64
    axes = [_axis_from_config(cfg, ax) for ax in "xyz"[:dim]]
    bcs = BoundarySpec([_bc_from_config(cfg, ax) for ax in "xyz"[:dim]])
    grid = build_grid(axes, bcs, dtype=dtype)
    force = None
    if cfg.get("physics", "force") == "constant":
        force = cfg.get("physics", "force_vector")[:dim]
    closure = None
    if cfg.get("physics", "closure") != "none":
        c = cfg.get("physics", "closure_c")
        closure = ClosureModel(
            kind=cfg.get("physics", "closure"),
            c=None if c < 0 else c,
            filter_rule=cfg.get("physics", "closure_filter"),
            p=cfg.get("physics", "closure_p"),
        )
    tol = cfg.get("solver", "tol")
    max_iter = cfg.get("solver", "max_iter")
    return Setup(
        grid,
        bcs,
        nu=cfg.get("physics", "nu"),
        force=force,
        closure=closure,
        solver=cfg.get("solver", "kind"),
        method=cfg.get("time", "method"),
        cfl_conv=cfg.get("time", "cfl_conv"),
        cfl_diff=cfg.get("time", "cfl_diff"),
        dt_max=cfg.get("time", "dt_max"),
        solver_tol=None if tol <= 0 else tol,
        solver_max_iter=None if max_iter <= 0 else max_iter,
    )


class _DiagnosticObserver:
    """Collects per-cadence step diagnostics for the results table."""

    def __init__(self, setup):
        self.setup = setup
        self.rows = []
        self._last_t = None

    def __call__(self, state):
        div = divergence(state.u)
        max_div = float(np.max(np.abs(div.interior)))
        energy = kinetic_energy(state.u)
        dt = 0.0 if self._last_t is None else state.t - self._last_t
        self._last_t = state.t
        row = {
            "step": state.step,
            "t": state.t,
            "dt": dt,
            "kinetic_energy": energy,
            "max_div": max_div,
        }
        self.rows.append(row)
        log.info(
            "step=%d t=%.6g dt=%.3g E=%.12g max|div|=%.3e",
            state.step, state.t, dt, energy, max_div,
        )
        if not (math.isfinite(energy) and math.isfinite(max_div)):
            raise NumericalError(f"non-finite diagnostics at step {state.step}")


def _study_simulate(cfg, setup, outdir):
    u0 = None
    grid = setup.grid
    if (
        grid.dim == 2
        and all(grid.periodic)
        and abs(grid.axes[0].b - 2 * math.pi) < 1e-12
        and abs(grid.axes[1].b - 2 * math.pi) < 1e-12
    ):
        # the standard demonstration flow on this domain
        u0, _ = taylor_green(grid, setup.nu, 0.0)
    obs = _DiagnosticObserver(setup)
    state = simulate(
        setup,
        cfg.get("time", "t_final"),
        dt=cfg.get("time", "dt"),
        observers=(obs,),
        u0=u0,
        observer_cadence=cfg.get("run", "observer_cadence"),
    )
    if cfg.get("run", "write_snapshots"):
        write_snapshot(os.path.join(outdir, "final"), state.u, state.t)
    write_csv(
        os.path.join(outdir, "results.csv"),
        "simulate",
        ["step", "t", "dt", "kinetic_energy", "max_div"],
        obs.rows,
    )
    return EXIT_OK


def _study_convergence(cfg, setup, outdir):
    dtype = np.float32 if cfg.get("run", "precision") == "f32" else np.float64
    rows = convergence_study(
        cfg.get("study", "convergence_ns"),
        dtype=dtype,
        solver=cfg.get("solver", "kind"),
        method=cfg.get("time", "method"),
        profile=cfg.get("study", "profile"),
        gamma=cfg.get("study", "gamma"),
        nu=cfg.get("physics", "nu"),
        t_final=cfg.get("time", "t_final"),
        check_dt=bool(cfg.get("study", "check_dt")),
    )
    for row in rows:
        log.info("n=%d error=%.6e order=%.3f", row["n"], row["error"], row["order"])
    write_csv(os.path.join(outdir, "results.csv"), "convergence",
              ["n", "error", "order"], rows)
    return EXIT_OK


def _study_vcurve(cfg, setup, outdir):
    lo, hi = cfg.get("study", "vcurve_decades")
    hs = np.logspace(lo, hi, cfg.get("study", "vcurve_points"))
    dtype = np.float32 if cfg.get("run", "precision") == "f32" else np.float64
    rows = fd_vcurve(hs, dtype=dtype)
    write_csv(os.path.join(outdir, "results.csv"), "vcurve",
              ["h", "err_order1", "err_order2"], rows)
    return EXIT_OK


def _study_adjoint(cfg, setup, outdir):
    rows = adjoint_check_rows(n_seeds=cfg.get("study", "adjoint_seeds"))
    for row in rows:
        log.info("%s fd_rel_error=%.3e pass=%s",
                 row["operator"], row["fd_rel_error"], row["pass"])
    write_csv(os.path.join(outdir, "results.csv"), "adjoint-check",
              ["operator", "fd_rel_error", "pass"], rows)
    if not all(r["pass"] for r in rows):
        raise NumericalError("adjoint finite-difference identity failed")
    return EXIT_OK


def _study_channel(cfg, setup, outdir):
    nx, ny, nz = cfg.get("study", "channel_n")
    dtype = np.float32 if cfg.get("run", "precision") == "f32" else np.float64
    closure = None
    if cfg.get("physics", "closure") != "none":
        c = cfg.get("physics", "closure_c")
        closure = ClosureModel(
            kind=cfg.get("physics", "closure"),
            c=None if c < 0 else c,
            filter_rule=cfg.get("physics", "closure_filter"),
            p=cfg.get("physics", "closure_p"),
        )
    chan = channel_setup(
        nx, ny, nz,
        gamma=cfg.get("study", "channel_gamma"),
        nu=cfg.get("physics", "nu"),
        dtype=dtype,
        solver=cfg.get("solver", "kind"),
        method=cfg.get("time", "method"),
        closure=closure,
        seed=cfg.get("run", "seed"),
        cfl_conv=cfg.get("time", "cfl_conv"),
        cfl_diff=cfg.get("time", "cfl_diff"),
        dt_max=cfg.get("time", "dt_max"),
    )
    obs = _DiagnosticObserver(chan)
    snapshots = []
    nut_snapshots = []

    def snap_observer(state):
        snapshots.append(state.u.copy())
        if chan.closure is not None:
            nut_snapshots.append(chan.closure.nu_t(state.u))

    state = run_steps(
        chan,
        cfg.get("study", "channel_steps"),
        observers=(obs, snap_observer),
        observer_cadence=cfg.get("run", "observer_cadence"),
    )
    for a in range(3):
        if not np.all(np.isfinite(state.u.u[a])):
            raise NumericalError("channel produced non-finite velocity values")
    profile = accumulate_stats(
        snapshots[-max(2, len(snapshots) // 2):],
        chan.bcs,
        chan.nu,
        wall_axis=1,
        nut_snapshots=nut_snapshots[-max(2, len(nut_snapshots) // 2):] or None,
    )
    write_profile_csv(os.path.join(outdir, "profile.csv"), profile)
    write_csv(os.path.join(outdir, "results.csv"), "channel-smoke",
              ["step", "t", "dt", "kinetic_energy", "max_div"], obs.rows)
    if cfg.get("run", "write_snapshots"):
        write_snapshot(os.path.join(outdir, "final"), state.u, state.t)
    return EXIT_OK


STUDY_RUNNERS = {
    "simulate": _study_simulate,
    "convergence": _study_convergence,
    "vcurve": _study_vcurve,
    "adjoint-check": _study_adjoint,
    "channel-smoke": _study_channel,
}


def run(cfg):
    """Execute the configured study; returns the process exit code."""
    outdir = cfg.get("run", "outdir")
    os.makedirs(outdir, exist_ok=True)
    handler = logging.FileHandler(os.path.join(outdir, "run.log"), mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    try:
        threads = cfg.get("run", "threads")
        if threads <= 0:
            threads = int(os.environ.get("STAGFLOW_THREADS", "0") or 0)
        if threads > 0:
            os.environ["OMP_NUM_THREADS"] = str(threads)
        atomic_write_text(os.path.join(outdir, "effective_config.ini"), emit_config(cfg))
        study = cfg.get("run", "study")
        setup = build_setup(cfg) if study == "simulate" else None
        return STUDY_RUNNERS[study](cfg, setup, outdir)
    finally:
        log.removeHandler(handler)
        handler.close()


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stagflow",
        description="staggered finite-volume incompressible flow studies",
    )
    parser.add_argument("--version", action="version", version=f"stagflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a study from a config file")
    runp.add_argument("config", help="path to the INI configuration")
    runp.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        dest="overrides",
        help="override a configuration value (repeatable)",
    )
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            print(f"stagflow: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        cfg = parse_config(text, overrides=args.overrides)
        return run(cfg)
    except ConfigurationError as exc:
        print(f"stagflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConvergenceError) as exc:
        print(f"stagflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"stagflow: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
