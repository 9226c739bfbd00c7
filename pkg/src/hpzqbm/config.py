"""Run configuration: one JSON file describes a complete, reproducible run.

Schema (unknown keys anywhere are rejected, every number must be finite)::

    {
      "system":  {"M": 1.0, "Omega": 1.0, "Omega_ren": 1.0},          # Omega_ren optional
      "bath":    {"spectral": {...}, "beta": 2.0 | "inf", "hbar": 1.0, "kB": 1.0},
      "grids":   {"ds": 0.001, "dt": 0.01, "t_max": 10.0, "dt_out": 0.1},
      "mode":    "exact" | "weak" | "ohmic_fp",
      "initial_states": [
        {"mean_q": 1.0, "mean_p": 0.0, "sigma_qq": 0.5, "sigma_pp": 0.5, "sigma_qp": 0.0}
      ],
      "elementary_times": [5.0],                                     # optional, default [t_max]
      "wigner_times": [0.0, 10.0],                                   # optional, default []
      "output": {"dir": "out"},                                      # optional
      "tolerances": {"solver_tol": 1e-5, "singular_tol": 1e-5, "fd_step": 0.001,
                     "rtol_coefficients": 1e-4, "rtol_moments": 1e-5, "check_times": 10}
    }

``ds`` is the Volterra/kernel grid, ``dt`` the spacing of coefficient rows (a
multiple of ``ds``), ``dt_out`` the moment output spacing.  The bath section
follows :func:`hpzqbm.bath.bath_from_dict`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .bath import BathSpec, bath_from_dict, bath_to_dict, grid_index
from .coefficients import MODES
from .dynamics import GaussianMomentState
from .elementary import DEFAULT_SINGULAR_TOL, DEFAULT_TOL, SystemParams
from .errors import ConfigurationError, UsageError

_TOP = {"system", "bath", "grids", "mode", "initial_states", "elementary_times", "wigner_times", "output", "tolerances"}
_STATE_KEYS = ("mean_q", "mean_p", "sigma_qq", "sigma_pp", "sigma_qp")


def _num(d, key, where, default=None, positive=False):
    if key not in d:
        if default is None:
            raise ConfigurationError(f"{where}: missing required key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigurationError(f"{where}.{key} must be a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigurationError(f"{where}.{key} must be > 0, got {v!r}")
    return float(v)


def _section(d, key, allowed, required=True):
    sec = d.get(key)
    if sec is None:
        if required:
            raise ConfigurationError(f"missing section {key!r}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigurationError(f"section {key!r} must be an object")
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigurationError(f"unknown keys in {key!r}: {sorted(extra)}")
    return sec


def _times(d, key, t_max):
    v = d.get(key)
    if v is None:
        return None
    if not isinstance(v, list):
        raise ConfigurationError(f"{key} must be a list of numbers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or not 0 <= x <= t_max:
            raise ConfigurationError(f"{key} entries must be finite numbers in [0, t_max], got {x!r}")
        out.append(float(x))
    return tuple(out)


@dataclass(frozen=True)
class Grids:
    ds: float
    dt: float
    t_max: float
    dt_out: float

    @property
    def coeff_stride(self):
        return grid_index(self.dt, self.ds)


@dataclass(frozen=True)
class Tolerances:
    solver_tol: float = DEFAULT_TOL
    singular_tol: float = DEFAULT_SINGULAR_TOL
    fd_step: float | None = None
    rtol_coefficients: float = 1e-4
    rtol_moments: float = 1e-5
    check_times: int = 10


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams
    bath: BathSpec
    grids: Grids
    mode: str = "exact"
    initial_states: tuple = ()
    elementary_times: tuple = ()
    wigner_times: tuple = ()
    output_dir: str = "out"
    tolerances: Tolerances = field(default_factory=Tolerances)

    @property
    def fd_step(self):
        return self.tolerances.fd_step if self.tolerances.fd_step is not None else self.grids.ds

    def to_dict(self):
        sys_d = {"M": self.system.M, "Omega": self.system.Omega}
        if self.system.Omega_ren is not None:
            sys_d["Omega_ren"] = self.system.Omega_ren
        tol = {k: getattr(self.tolerances, k) for k in ("solver_tol", "singular_tol", "rtol_coefficients", "rtol_moments", "check_times")}
        if self.tolerances.fd_step is not None:
            tol["fd_step"] = self.tolerances.fd_step
        g = self.grids
        return {
            "system": sys_d,
            "bath": bath_to_dict(self.bath),
            "grids": {"ds": g.ds, "dt": g.dt, "t_max": g.t_max, "dt_out": g.dt_out},
            "mode": self.mode,
            "initial_states": [{k: getattr(s, k) for k in _STATE_KEYS} for s in self.initial_states],
            "elementary_times": list(self.elementary_times),
            "wigner_times": list(self.wigner_times),
            "output": {"dir": self.output_dir},
            "tolerances": tol,
        }


def _multiple(a, b, what):
    n = round(a / b)
    if n < 1 or abs(n * b - a) > 1e-9 * max(1.0, a):
        raise ConfigurationError(f"{what}: {a!r} is not a positive multiple of {b!r}")


def config_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigurationError("configuration must be a JSON object")
    extra = set(d) - _TOP
    if extra:
        raise ConfigurationError(f"unknown top-level keys: {sorted(extra)}")

    s = _section(d, "system", {"M", "Omega", "Omega_ren"})
    omega_ren = _num(s, "Omega_ren", "system") if "Omega_ren" in s else None
    system = SystemParams(_num(s, "M", "system", 1.0), _num(s, "Omega", "system"), omega_ren)
    if "bath" not in d:
        raise ConfigurationError("missing section 'bath'")
    bath = bath_from_dict(d["bath"])

    g = _section(d, "grids", {"ds", "dt", "t_max", "dt_out"})
    ds = _num(g, "ds", "grids", positive=True)
    t_max = _num(g, "t_max", "grids", 0.0)
    if t_max < 0:
        raise ConfigurationError("grids.t_max must be >= 0")
    dt = _num(g, "dt", "grids", ds, positive=True)
    dt_out = _num(g, "dt_out", "grids", dt, positive=True)
    _multiple(dt, ds, "grids.dt")
    if t_max > 0:
        _multiple(t_max, dt, "grids.t_max")
        _multiple(t_max, dt_out, "grids.t_max")
    grids = Grids(ds, dt, t_max, dt_out)

    mode = d.get("mode", "exact")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {list(MODES)}, got {mode!r}")

    states = d.get("initial_states", [])
    if not isinstance(states, list):
        raise ConfigurationError("initial_states must be a list")
    parsed = []
    for i, st in enumerate(states):
        if not isinstance(st, dict) or set(st) != set(_STATE_KEYS):
            raise ConfigurationError(f"initial_states[{i}] needs exactly the keys {list(_STATE_KEYS)}")
        vals = [_num(st, k, f"initial_states[{i}]") for k in _STATE_KEYS]
        try:
            parsed.append(GaussianMomentState(*vals))
        except ValueError as exc:
            raise ConfigurationError(f"initial_states[{i}]: {exc}") from None

    el = _times(d, "elementary_times", t_max)
    wg = _times(d, "wigner_times", t_max) or ()
    for x in el or ():
        try:
            grid_index(x, ds)
        except UsageError as exc:
            raise ConfigurationError(f"elementary_times: {exc}") from None
    out = _section(d, "output", {"dir"}, required=False)
    out_dir = out.get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigurationError("output.dir must be a non-empty string")

    t = _section(d, "tolerances", {"solver_tol", "singular_tol", "fd_step", "rtol_coefficients", "rtol_moments", "check_times"}, required=False)
    check_times = t.get("check_times", 10)
    if isinstance(check_times, bool) or not isinstance(check_times, int) or check_times < 1:
        raise ConfigurationError("tolerances.check_times must be a positive integer")
    tol = Tolerances(
        _num(t, "solver_tol", "tolerances", DEFAULT_TOL, positive=True),
        _num(t, "singular_tol", "tolerances", DEFAULT_SINGULAR_TOL, positive=True),
        _num(t, "fd_step", "tolerances", positive=True) if "fd_step" in t else None,
        _num(t, "rtol_coefficients", "tolerances", 1e-4, positive=True),
        _num(t, "rtol_moments", "tolerances", 1e-5, positive=True),
        check_times,
    )
    return RunConfig(system, bath, grids, mode, tuple(parsed), el if el is not None else (t_max,), wg, out_dir, tol)


def _reject_constant(name):
    raise ConfigurationError(f"non-finite JSON constant {name} is not allowed")


def load_config(path):
    try:
        with open(path) as fh:
            d = json.load(fh, parse_constant=_reject_constant)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(d)
