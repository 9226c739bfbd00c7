"""Time-dependent coefficients A, B, C, D of the reduced Wigner equation

    dW/dt = -(p/M) dW/dq + M Omega^2 q dW/dp + A q dW/dp + B d(pW)/dp
            + C d2W/dpdq + D d2W/dp2

and their master-equation form (delta Omega^2, Gamma, Gamma f, Gamma h).

Three modes: ``exact`` (general environment), ``weak`` (second order in the
couplings) and ``ohmic_fp`` (high-temperature Ohmic limit, constant rows).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .bath import OhmicExpCutoff, OhmicSharpCutoff, eta_moment, grid_index, tabulate_kernels
from .elementary import DEFAULT_SINGULAR_TOL, DEFAULT_TOL, solve_ivp_pair
from .errors import CoefficientSingularityError, ConfigurationError, HpzError, NumericalError, UsageError
from .io import dump_json, format_float, read_csv, write_csv
from .parallel import map_ordered

MODES = ("exact", "weak", "ohmic_fp")
_B_FLOOR = 1e-10


@dataclass(frozen=True)
class CoefficientSet:
    t: float
    A: float
    B: float
    C: float
    D: float

    def to_hpz(self, hbar=1.0, M=1.0):
        return HpzCoefficients(self.t, self.A / M, self.B / 2.0, self.C / hbar, self.D / (hbar * M))

    def as_tuple(self):
        return (self.A, self.B, self.C, self.D)


@dataclass(frozen=True)
class HpzCoefficients:
    """Master-equation coefficients; f and h alone are defined only when |B| > 1e-10."""

    t: float
    delta_Omega2: float
    Gamma: float
    Gamma_f: float
    Gamma_h: float

    @property
    def f(self):
        return self.Gamma_f / self.Gamma if abs(2.0 * self.Gamma) > _B_FLOOR else None

    @property
    def h(self):
        return self.Gamma_h / self.Gamma if abs(2.0 * self.Gamma) > _B_FLOOR else None

    def to_coefficient_set(self, hbar=1.0, M=1.0):
        return CoefficientSet(self.t, M * self.delta_Omega2, 2.0 * self.Gamma, hbar * self.Gamma_f, hbar * M * self.Gamma_h)


def _cumtrapz(y, dx):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * dx * (y[1:] + y[:-1]))
    return out


def _causal_conv(kernel, f, dx):
    """out[n] = int_0^{t_n} kernel(t_n - b) f(b) db, trapezoidal, for every n."""
    full = fftconvolve(kernel, f)[: f.size]
    out = dx * (full - 0.5 * (kernel[: f.size] * f[0] + kernel[0] * f))
    out[0] = 0.0
    return out


class ExactCoefficientEngine:
    """Exact A, B, C, D on the whole grid s = k*ds, 0 <= s <= t_max.

    With the IVP basis v1, v2 and memory integrals I_i(t) = int_0^t eta(t-s) v_i(s) ds,

        A = 2 [v2'(t) I1 - v1'(t) I2] / W,    B = (2/M) [v1(t) I2 - v2(t) I1] / W,

    W = v1 v2' - v1' v2 (identical to the u1/u2 expressions, without the
    removable singularity at v2(t) = 0; W = 0 is where du1(t) = 0).

    In the diffusion coefficients the retarded Green function is the Volterra
    resolvent G1(t, l) = v2(t - l), and the final-value kernel integrated
    against eta(t - s) collapses to

        m(x) = I2(x) - (A/2) v2(x) - (M B/2) v2'(x),   x = t - tau,

    so the triple integrals reduce to Q_fg(t) = int_0^t int_0^t f(a) nu(b-a) g(b),
    accumulated from dQ_fg/dt = f(t) (nu*g)(t) + g(t) (nu*f)(t):

        C = (hbar/M) int_0^t v2 nu - (2 hbar/M^2) [Q_{v2,I2} - (A/2) Q_{v2,v2} - (MB/2) Q_{v2,v2'}]
        D = hbar int_0^t v2' nu   - (2 hbar/M)   [Q_{v2',I2} - (A/2) Q_{v2',v2} - (MB/2) Q_{v2',v2'}]
    """

    def __init__(self, sys, bath, kernels, t_max, ds, tol=DEFAULT_TOL, singular_tol=DEFAULT_SINGULAR_TOL, basis=None):
        self.sys, self.bath, self.ds = sys, bath, ds
        self.singular_tol = singular_tol
        n = kernels.covers(t_max, ds)
        if basis is None:
            basis = solve_ivp_pair(sys, kernels, max(t_max, ds), ds, tol=tol)
        self.basis = basis
        N = n + 1
        M, hbar = sys.M, bath.hbar
        v1, v2 = basis.v[0, :N], basis.v[1, :N]
        dv1, dv2 = basis.dv[0, :N], basis.dv[1, :N]
        I1, I2 = basis.memory[0, :N], basis.memory[1, :N]
        nu = kernels.nu[:N]

        p, q = v1 * dv2, dv1 * v2
        W = p - q
        self.singular = np.abs(W) <= singular_tol * (np.abs(p) + np.abs(q))
        Wsafe = np.where(self.singular, np.nan, W)
        A = 2.0 * (dv2 * I1 - dv1 * I2) / Wsafe
        B = (2.0 / M) * (v1 * I2 - v2 * I1) / Wsafe

        conv = {name: _causal_conv(nu, f, ds) for name, f in (("v2", v2), ("dv2", dv2), ("I2", I2))}
        arr = {"v2": v2, "dv2": dv2, "I2": I2}

        def Q(f, g):
            return _cumtrapz(arr[f] * conv[g] + arr[g] * conv[f], ds)

        C = (hbar / M) * _cumtrapz(v2 * nu, ds) - (2.0 * hbar / M**2) * (
            Q("v2", "I2") - 0.5 * A * Q("v2", "v2") - 0.5 * M * B * Q("v2", "dv2")
        )
        D = hbar * _cumtrapz(dv2 * nu, ds) - (2.0 * hbar / M) * (
            Q("dv2", "I2") - 0.5 * A * Q("dv2", "v2") - 0.5 * M * B * Q("dv2", "dv2")
        )
        self.t = np.arange(N) * ds
        self.A, self.B, self.C, self.D = A, B, C, D

    def at(self, t):
        n = grid_index(t, self.ds)
        if n >= self.t.size:
            raise UsageError(f"t={t!r} beyond engine range {self.t[-1]!r}")
        if self.singular[n]:
            raise CoefficientSingularityError(t)
        return CoefficientSet(t, float(self.A[n]), float(self.B[n]), float(self.C[n]), float(self.D[n]))


def coefficients_exact(sys, bath, kernels, t, ds, tol=DEFAULT_TOL, singular_tol=DEFAULT_SINGULAR_TOL):
    if grid_index(t, ds) == 0:
        return CoefficientSet(t, 0.0, 0.0, 0.0, 0.0)
    return ExactCoefficientEngine(sys, bath, kernels, t, ds, tol=tol, singular_tol=singular_tol).at(t)


def coefficients_weak(sys, kernels, t, hbar=1.0):
    """Second-order (weak-coupling) coefficients; Omega = 0 uses sin(Omega s)/Omega -> s."""
    n = grid_index(t, kernels.dt)
    if n + 1 > len(kernels):
        raise UsageError(f"kernel table covers s <= {kernels.s_max!r}, need {t!r}")
    if n == 0:
        return CoefficientSet(t, 0.0, 0.0, 0.0, 0.0)
    M, om = sys.M, sys.Omega
    s = np.arange(n + 1) * kernels.dt
    back = t - s
    cos_b = np.cos(om * back)
    sinc_b = np.sin(om * back) / om if om > 0 else back
    A = 2.0 * eta_moment(kernels, cos_b, om * np.sin(om * back))
    B = -(2.0 / M) * eta_moment(kernels, sinc_b, -cos_b)
    nu = kernels.nu[: n + 1]
    sinc = np.sin(om * s) / om if om > 0 else s
    C = (hbar / M) * np.trapezoid(nu * sinc, dx=kernels.dt)
    D = hbar * np.trapezoid(nu * np.cos(om * s), dx=kernels.dt)
    return CoefficientSet(t, A, B, float(C), float(D))


def coefficients_ohmic_fp(sys, gamma0, T, kB=1.0, t=0.0):
    """Constant high-temperature Ohmic set: B = 2 gamma0, C = 0, D = 2 M gamma0 kB T.

    A carries the divergent -2 M gamma delta(0) shift and is reported as -inf;
    the shift is absorbed into ``sys.Omega_ren``, which must be set.
    """
    if sys.Omega_ren is None:
        raise ConfigurationError("ohmic_fp mode needs Omega_ren; the bare Omega cannot be used in this limit")
    if not (gamma0 >= 0 and T >= 0):
        raise ConfigurationError("gamma0 and T must be >= 0")
    return CoefficientSet(t, -math.inf, 2.0 * gamma0, 0.0, 2.0 * sys.M * gamma0 * kB * T)


@dataclass(frozen=True, eq=False)
class CoefficientTrajectory:
    """Coefficient rows on a uniform grid starting at 0.

    Flagged rows (singular times) hold NaN and a non-empty ``flags`` entry.
    """

    t: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    provenance: tuple
    flags: tuple
    hbar: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
            raise UsageError("trajectory grid must be a non-empty 1-d array starting at 0")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise UsageError("trajectory grid must be strictly increasing")
        if not (len(self.provenance) == len(self.flags) == t.size):
            raise UsageError("provenance and flags must have one entry per row")
        for name in ("t", "A", "B", "C", "D"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != t.shape:
                raise UsageError(f"column {name} has wrong length")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        object.__setattr__(self, "flags", tuple(self.flags))

    def __len__(self):
        return self.t.size

    @property
    def spacing(self):
        return float(self.t[1] - self.t[0]) if len(self) > 1 else 0.0

    def row(self, i):
        if self.flags[i]:
            return None
        return CoefficientSet(float(self.t[i]), float(self.A[i]), float(self.B[i]), float(self.C[i]), float(self.D[i]))

    def rows(self):
        return [self.row(i) for i in range(len(self))]

    def flagged(self):
        return [i for i, f in enumerate(self.flags) if f]

    def singular_times(self):
        return [float(self.t[i]) for i in self.flagged()]

    def hpz_columns(self):
        return {
            "delta_Omega2": self.A / self.M,
            "Gamma": self.B / 2.0,
            "Gamma_f": self.C / self.hbar,
            "Gamma_h": self.D / (self.hbar * self.M),
        }

    HEADER = ["t", "A", "B", "C", "D", "delta_Omega2", "Gamma", "Gamma_f", "Gamma_h", "provenance", "flag"]

    def _records(self):
        hp = self.hpz_columns()
        for i in range(len(self)):
            nums = [self.A[i], self.B[i], self.C[i], self.D[i], hp["delta_Omega2"][i], hp["Gamma"][i], hp["Gamma_f"][i], hp["Gamma_h"][i]]
            if self.flags[i]:
                nums = [""] * len(nums)
            yield [float(self.t[i])] + nums + [self.provenance[i], self.flags[i]]

    def to_csv(self, path):
        write_csv(path, self.HEADER, self._records())

    def to_json(self, path=None):
        recs = [dict(zip(self.HEADER, [None if v == "" else v for v in r])) for r in self._records()]
        return dump_json({"hbar": self.hbar, "M": self.M, "rows": recs}, path)

    @classmethod
    def from_csv(cls, path, hbar=1.0, M=1.0):
        header, rows = read_csv(path)
        if header[: len(cls.HEADER) - 1] != cls.HEADER[:-1]:
            raise UsageError(f"{path}: not a coefficient trajectory CSV")
        col = {name: i for i, name in enumerate(header)}

        def num(r, k):
            return math.nan if r[col[k]] == "" else float(r[col[k]])

        return cls(
            t=[float(r[0]) for r in rows],
            A=[num(r, "A") for r in rows],
            B=[num(r, "B") for r in rows],
            C=[num(r, "C") for r in rows],
            D=[num(r, "D") for r in rows],
            provenance=[r[col["provenance"]] for r in rows],
            flags=[r[col["flag"]] if "flag" in col else "" for r in rows],
            hbar=hbar,
            M=M,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        rows = d["rows"]
        nanify = lambda v: math.nan if v is None else v
        return cls(
            t=[r["t"] for r in rows],
            A=[nanify(r["A"]) for r in rows],
            B=[nanify(r["B"]) for r in rows],
            C=[nanify(r["C"]) for r in rows],
            D=[nanify(r["D"]) for r in rows],
            provenance=[r["provenance"] for r in rows],
            flags=[r["flag"] for r in rows],
            hbar=d["hbar"],
            M=d["M"],
        )


def uniform_grid(t_max, dt):
    n = int(round(t_max / dt))
    if n < 0 or abs(n * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise UsageError(f"t_max={t_max!r} is not a multiple of dt={dt!r}")
    return np.arange(n + 1) * dt


def _check_grid(t_grid, ds):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
        raise UsageError("t_grid must start at 0")
    if t.size > 1:
        d = np.diff(t)
        if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, d[0]):
            raise UsageError("t_grid must be uniform and strictly increasing")
    for x in t:
        grid_index(x, ds)
    return t


def trajectory(sys, bath, mode, t_grid, ds, kernels=None, threads=1, tol=DEFAULT_TOL, singular_tol=DEFAULT_SINGULAR_TOL):
    """Coefficients on ``t_grid`` for one mode; singular rows are flagged, not filled."""
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    t = _check_grid(t_grid, ds)
    t_end = float(t[-1])
    if mode != "ohmic_fp" and kernels is None:
        kernels = tabulate_kernels(bath, ds, max(t_end, ds))

    if mode == "exact":
        engine = ExactCoefficientEngine(sys, bath, kernels, t_end, ds, tol=tol, singular_tol=singular_tol) if t_end > 0 else None
        compute = (lambda x: engine.at(x)) if engine else (lambda x: CoefficientSet(x, 0.0, 0.0, 0.0, 0.0))
    elif mode == "weak":
        compute = lambda x: coefficients_weak(sys, kernels, x, hbar=bath.hbar)
    else:
        if not isinstance(bath.spectral, (OhmicExpCutoff, OhmicSharpCutoff)):
            raise ConfigurationError("ohmic_fp mode requires an Ohmic spectral density")
        g0, T = bath.spectral.gamma0, bath.temperature
        coefficients_ohmic_fp(sys, g0, T, bath.kB)
        compute = lambda x: coefficients_ohmic_fp(sys, g0, T, bath.kB, t=x)

    def one(item):
        i, x = item
        try:
            return compute(float(x)), ""
        except CoefficientSingularityError as exc:
            return None, str(exc)
        except HpzError as exc:
            family = ConfigurationError if isinstance(exc, ValueError) else NumericalError
            raise family(f"row {i} (t={float(x)!r}): {exc}") from exc

    results = map_ordered(one, list(enumerate(t)), threads)
    cols = {k: [] for k in "ABCD"}
    flags = []
    for cs, flag in results:
        flags.append(flag)
        for k in "ABCD":
            cols[k].append(math.nan if cs is None else getattr(cs, k))
    return CoefficientTrajectory(t, cols["A"], cols["B"], cols["C"], cols["D"], (mode,) * t.size, tuple(flags), bath.hbar, sys.M)
