"""Run configuration: a flat INI file with sections, strict keys, defaults.

The parsed, default-filled configuration is the complete record of an
experiment: ``emit_config`` writes it back out, and re-running from that
echo reproduces the outputs byte for byte.  Unknown keys are hard errors
with the offending key and line named.
"""

import configparser
import io
import math

from .errors import ConfigurationError

_F = float
_I = int
_S = str


def _dt_value(text):
    if text == "adaptive":
        return "adaptive"
    return float(text)


def _float_list(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _int_list(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


STUDIES = ("simulate", "convergence", "vcurve", "adjoint-check", "channel-smoke")

# section -> key -> (parser, default); a default of None marks a required key
SCHEMA = {
    "run": {
        "study": (_S, None),
        "precision": (_S, "f64"),
        "seed": (_I, 0),
        "outdir": (_S, "out"),
        "threads": (_I, 0),
        "observer_cadence": (_I, 10),
        "write_snapshots": (_I, 0),
    },
    "grid": {
        "dim": (_I, 2),
        "x_kind": (_S, "uniform"),
        "x_a": (_F, 0.0),
        "x_b": (_F, 2.0 * math.pi),
        "x_n": (_I, 32),
        "x_gamma": (_F, 1.5),
        "x_s": (_F, 1.3),
        "y_kind": (_S, "uniform"),
        "y_a": (_F, 0.0),
        "y_b": (_F, 2.0 * math.pi),
        "y_n": (_I, 32),
        "y_gamma": (_F, 1.5),
        "y_s": (_F, 1.3),
        "z_kind": (_S, "uniform"),
        "z_a": (_F, 0.0),
        "z_b": (_F, 2.0 * math.pi),
        "z_n": (_I, 32),
        "z_gamma": (_F, 1.5),
        "z_s": (_F, 1.3),
    },
    "bc": {
        "x": (_S, "periodic"),
        "y": (_S, "periodic"),
        "z": (_S, "periodic"),
        "dirichlet_value": (_S, "zero"),
        "constant_u": (_float_list, (0.0, 0.0, 0.0)),
    },
    "physics": {
        "nu": (_F, 1e-3),
        "force": (_S, "none"),
        "force_vector": (_float_list, (1.0, 0.0, 0.0)),
        "closure": (_S, "none"),
        "closure_c": (_F, -1.0),
        "closure_p": (_F, -2.5),
        "closure_filter": (_S, "geometric"),
    },
    "solver": {
        "kind": (_S, "direct"),
        "tol": (_F, -1.0),
        "max_iter": (_I, 0),
    },
    "time": {
        "method": (_S, "ssp33"),
        "dt": (_dt_value, "adaptive"),
        "cfl_conv": (_F, 0.85),
        "cfl_diff": (_F, 0.85),
        "dt_max": (_F, 0.05),
        "t_final": (_F, 1.0),
    },
    "study": {
        "convergence_ns": (_int_list, (16, 32, 64)),
        "profile": (_S, "uniform"),
        "gamma": (_F, 1.5),
        "check_dt": (_I, 0),
        "vcurve_decades": (_float_list, (-12.0, 0.0)),
        "vcurve_points": (_I, 193),
        "channel_n": (_int_list, (32, 48, 16)),
        "channel_gamma": (_F, 2.0),
        "channel_steps": (_I, 500),
        "adjoint_seeds": (_I, 50),
    },
}

_ENUMS = {
    ("run", "study"): STUDIES,
    ("run", "precision"): ("f32", "f64"),
    ("grid", "x_kind"): ("uniform", "cosine", "tanh", "stretched"),
    ("grid", "y_kind"): ("uniform", "cosine", "tanh", "stretched"),
    ("grid", "z_kind"): ("uniform", "cosine", "tanh", "stretched"),
    ("bc", "x"): ("periodic", "dirichlet", "symmetric"),
    ("bc", "y"): ("periodic", "dirichlet", "symmetric"),
    ("bc", "z"): ("periodic", "dirichlet", "symmetric"),
    ("bc", "dirichlet_value"): ("zero", "constant"),
    ("physics", "force"): ("none", "constant"),
    ("physics", "closure"): ("none", "smagorinsky", "vreman", "qr", "wale", "sigma", "s3pqr"),
    ("solver", "kind"): ("spectral", "direct", "cg"),
    ("time", "method"): ("ssp33", "wray3"),
    ("study", "profile"): ("uniform", "tanh"),
}


class RunConfig:
    """Validated key/value store mirroring the schema sections."""

    def __init__(self, values):
        self.values = values

    def __getitem__(self, key):
        return self.values[key]

    def get(self, section, key):
        return self.values[(section, key)]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values


def _key_lines(text):
    """Map (section, key) to the 1-based line where the key appears."""
    lines = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            lines[("__section__", section)] = i
            continue
        if "=" in line and section is not None:
            key = line.split("=", 1)[0].strip()
            lines[(section, key)] = i
    return lines


def parse_config(text, overrides=()):
    """Parse INI text (plus ``section.key=value`` overrides) into a
    :class:`RunConfig`, applying defaults and cross-field checks."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}")
    where = _key_lines(text)

    raw = {}
    for section in parser.sections():
        if section not in SCHEMA:
            line = where.get(("__section__", section), "?")
            raise ConfigurationError(f"unknown section [{section}] (line {line})")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                line = where.get((section, key), "?")
                raise ConfigurationError(
                    f"unknown key {section}.{key} (line {line})"
                )
            raw[(section, key)] = (value, where.get((section, key), "?"))
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value: {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        section, key = section.strip(), key.strip()
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown key {section}.{key} (from --set)")
        raw[(section, key)] = (value.strip(), "--set")

    values = {}
    for section, keys in SCHEMA.items():
        for key, (convert, default) in keys.items():
            if (section, key) in raw:
                text_value, line = raw[(section, key)]
                try:
                    values[(section, key)] = convert(text_value)
                except (TypeError, ValueError):
                    raise ConfigurationError(
                        f"bad value for {section}.{key} (line {line}): {text_value!r}"
                    )
            else:
                if default is None:
                    raise ConfigurationError(f"missing required key {section}.{key}")
                values[(section, key)] = default
    for (section, key), allowed in _ENUMS.items():
        v = values[(section, key)]
        if v not in allowed:
            raise ConfigurationError(
                f"{section}.{key} must be one of {allowed}, got {v!r}"
            )
    _cross_checks(values)
    return RunConfig(values)


def _cross_checks(values):
    dim = values[("grid", "dim")]
    if dim not in (2, 3):
        raise ConfigurationError(f"grid.dim must be 2 or 3, got {dim}")
    axes = "xyz"[:dim]
    if values[("solver", "kind")] == "spectral":
        for ax in axes:
            if values[("bc", ax)] != "periodic":
                raise ConfigurationError(
                    "solver.kind=spectral requires periodic boundaries on every axis"
                )
            if values[("grid", f"{ax}_kind")] != "uniform":
                raise ConfigurationError(
                    "solver.kind=spectral requires uniform grids on every axis"
                )
    for ax in axes:
        n = values[("grid", f"{ax}_n")]
        if n < 1:
            raise ConfigurationError(f"grid.{ax}_n must be positive, got {n}")
        if values[("grid", f"{ax}_a")] >= values[("grid", f"{ax}_b")]:
            raise ConfigurationError(f"grid.{ax}_a must be below grid.{ax}_b")
    dt = values[("time", "dt")]
    if dt != "adaptive" and dt <= 0:
        raise ConfigurationError("time.dt must be positive or 'adaptive'")


def emit_config(cfg):
    """Serialize the effective configuration; reparsing reproduces it."""
    out = io.StringIO()
    for section in SCHEMA:
        out.write(f"[{section}]\n")
        for key in SCHEMA[section]:
            v = cfg.get(section, key)
            if isinstance(v, tuple):
                text = ", ".join(repr(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()
