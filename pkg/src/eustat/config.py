"""Sectioned KEY=VALUE experiment configuration.

Format: [section] headers, KEY=VALUE lines, full-line or trailing #
comments, case-sensitive keys.  Unknown sections or keys and duplicate keys
are hard errors; every downstream numeric constraint is re-validated at
parse time.  `eustat info` prints the resolved values including defaults.
"""

import math
from dataclasses import dataclass, field, fields

from eustat.errors import ConfigParseError, ConfigValidationError

_REQUIRED = object()


def _parse_bool(s):
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float(s):
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _parse_float_list(s):
    s = s.strip()
    if not s:
        return ()
    return tuple(_parse_float(tok) for tok in s.split(","))


def _parse_str_list(s):
    s = s.strip()
    if not s:
        return ()
    return tuple(tok.strip() for tok in s.split(","))


_TYPES = {
    "int": lambda s: int(s, 10),
    "float": _parse_float,
    "bool": _parse_bool,
    "str": str,
    "float_list": _parse_float_list,
    "str_list": _parse_str_list,
}

# section -> key -> (type, default)
SCHEMA = {
    "grid": {
        "n": ("int", 128),
        "box_half_width": ("float", math.pi),
    },
    "sigma": {
        "support_radius": ("float", 0.0),  # 0 = box_half_width / 4
        "horizon_T": ("float", 1.0),
    },
    "solver": {
        "nu": ("float", 0.0),
        "dt": ("float", 0.005),
        "scheme": ("str", "integrating_factor_rk4"),
        "n_saves": ("int", 9),
        "save_times": ("float_list", ()),  # overrides n_saves when given
        "boundary_guard_tol": ("float", 1e-5),
    },
    "measure": {
        "family": ("str", "random_amplitude_blobs"),
        "class": ("str", "yudovich_A"),
        "p": ("float", 2.0),
        "mollify_eps": ("float", 0.0),
        "n_atoms": ("int", 8),
        "master_seed": ("int", 0),
        "weights": ("str", "uniform"),
        "pattern": ("str", "quadrupole"),
        "width": ("float", 0.0),  # 0 = 0.18 * box_half_width
        "center_x": ("float", 0.0),
        "center_y": ("float", 0.0),
        "amp_lo": ("float", 0.5),
        "amp_hi": ("float", 1.5),
        "place_radius": ("float", 0.0),
        "m_coef": ("float", 0.0),
    },
    "verify": {
        "laws": ("str_list", ("energy", "vorticity")),
        "q_list": ("str_list", ("2",)),
        "phi_kinds": ("str_list", ("first_moment",)),
        "k_fields": ("int", 2),
        "field_width": ("float", 0.0),
        "cutoff_radius": ("float", 1e6),
        "t_prime": ("float", 0.0),
        "t_final": ("float", 0.0),  # 0 = horizon_T
        "fl_tol": ("float", 1e-6),
        "nu_schedule": ("float_list", (1e-2, 5e-3, 2.5e-3, 1.25e-3)),
        "epsilon_schedule": ("float_list", ()),  # empty = {16h, 8h, 4h}
        "n_slices": ("int", 16),
        "slice_seed": ("int", 7),
        "inviscid_ratio": ("float", 0.25),
    },
    "io": {
        "out_dir": ("str", "out"),
        "snapshot_retention": ("str", "final"),
    },
}

_ENUMS = {
    ("solver", "scheme"): ("integrating_factor_rk4", "viscous_splitting"),
    ("measure", "family"): ("fixed_atoms", "random_amplitude_blobs", "random_placement_blobs"),
    ("measure", "class"): ("yudovich_A", "lp_B", "vortex_sheet_C_mollified", "l1_D_mollified"),
    ("measure", "weights"): ("uniform",),
    ("measure", "pattern"): ("quadrupole", "blob", "dipole", "shear"),
    ("io", "snapshot_retention"): ("all", "final", "none"),
}


@dataclass
class ExperimentConfig:
    values: dict  # (section, key) -> parsed value

    def get(self, section, key):
        return self.values[(section, key)]

    def resolved_lines(self):
        out = []
        for section in SCHEMA:
            out.append(f"[{section}]")
            for key in SCHEMA[section]:
                v = self.values[(section, key)]
                if isinstance(v, tuple):
                    v = ",".join(str(x) for x in v)
                out.append(f"{key}={v}")
        return out


def _validate(cfg: ExperimentConfig):
    def need(cond, message):
        if not cond:
            raise ConfigValidationError(message)

    g = cfg.get
    n = g("grid", "n")
    need(n >= 16 and (n & (n - 1)) == 0, "grid.n must be a power of two >= 16")
    L = g("grid", "box_half_width")
    need(L > 0, "grid.box_half_width > 0")
    sr = g("sigma", "support_radius")
    need(sr >= 0, "sigma.support_radius >= 0")
    need(sr <= L / 4 * (1 + 1e-12), "sigma.support_radius <= box_half_width/4")
    need(g("sigma", "horizon_T") > 0, "sigma.horizon_T > 0")
    need(g("solver", "nu") >= 0, "nu >= 0")
    need(g("solver", "dt") > 0, "solver.dt > 0")
    need(g("solver", "n_saves") >= 2, "solver.n_saves >= 2")
    sts = g("solver", "save_times")
    if sts:
        T = g("sigma", "horizon_T")
        need(sts == tuple(sorted(set(sts))), "solver.save_times strictly increasing")
        need(sts[0] == 0.0, "solver.save_times must include 0")
        need(abs(sts[-1] - T) <= 1e-12 * T, "solver.save_times must end at horizon_T")
    need(g("solver", "boundary_guard_tol") > 0, "solver.boundary_guard_tol > 0")
    need(g("measure", "n_atoms") >= 1, "measure.n_atoms >= 1")
    need(g("measure", "master_seed") >= 0, "measure.master_seed >= 0")
    need(g("measure", "p") >= 1, "measure.p >= 1")
    need(g("measure", "amp_lo") <= g("measure", "amp_hi"), "measure.amp_lo <= amp_hi")
    need(g("verify", "k_fields") >= 1, "verify.k_fields >= 1")
    need(g("verify", "n_slices") >= 1, "verify.n_slices >= 1")
    need(g("verify", "fl_tol") > 0, "verify.fl_tol > 0")
    nus = g("verify", "nu_schedule")
    need(all(v > 0 for v in nus), "verify.nu_schedule entries > 0")
    need(all(b < a for a, b in zip(nus, nus[1:])), "verify.nu_schedule strictly decreasing")
    for (section, key), allowed in _ENUMS.items():
        need(
            g(section, key) in allowed,
            f"{section}.{key} must be one of {', '.join(allowed)}",
        )
    for q in g("verify", "q_list"):
        if q != "inf":
            try:
                qv = float(q)
            except ValueError:
                raise ConfigValidationError(f"verify.q_list entry {q!r} is not a number or inf")
            need(qv >= 1, "verify.q_list entries >= 1")


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    seen = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigParseError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected KEY=VALUE, got {line!r}", lineno)
        if section is None:
            raise ConfigParseError("KEY=VALUE before any [section] header", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA[section]:
            raise ConfigParseError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in seen:
            raise ConfigParseError(f"duplicate key {key!r} in section [{section}]", lineno)
        seen.add((section, key))
        type_name, _default = SCHEMA[section][key]
        try:
            values[(section, key)] = _TYPES[type_name](value)
        except ValueError as exc:
            raise ConfigParseError(f"{section}.{key}: {exc}", lineno)
    for section, keys in SCHEMA.items():
        for key, (type_name, default) in keys.items():
            values.setdefault((section, key), default)
    cfg = ExperimentConfig(values)
    _validate(cfg)
    return cfg
