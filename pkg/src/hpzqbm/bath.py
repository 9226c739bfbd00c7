"""Environments, spectral densities and the memory kernels gamma, eta, nu.

A bath is either a finite collection of oscillators (handled through exact
mode sums) or an Ohmic continuum with an exponential or sharp cutoff,

    I(w) = (2/pi) M gamma0 w cutoff(w / Lambda).

Kernels:

    gamma(s) = int_0^inf dw I(w)/w cos(w s)
    eta(s)   = d gamma / ds
    nu(s)    = int_0^inf dw I(w) coth(hbar w beta / 2) cos(w s)

``eta`` is never sampled pointwise; every consumer goes through
:func:`eta_moment`, which integrates by parts onto ``gamma``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigurationError, UsageError
from .io import format_float

__all__ = [
    "BathMode",
    "Discrete",
    "OhmicExpCutoff",
    "OhmicSharpCutoff",
    "SpectralDensity",
    "BathSpec",
    "KernelTable",
    "coth_half",
    "spectral_density",
    "gamma_kernel",
    "nu_kernel",
    "eta_moment",
    "tabulate_kernels",
    "cosine_transform",
    "discretize",
    "bath_from_dict",
    "bath_to_dict",
]

# coth(x/2) branch points
_COTH_SMALL = 1e-4
_COTH_LARGE = 50.0


@dataclass(frozen=True)
class BathMode:
    coupling: float
    mass: float
    frequency: float

    def __post_init__(self):
        if not math.isfinite(self.coupling):
            raise ConfigurationError(f"bath mode coupling must be finite, got {self.coupling!r}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ConfigurationError(f"bath mode mass must be > 0, got {self.mass!r}")
        if not (self.frequency > 0 and math.isfinite(self.frequency)):
            raise ConfigurationError(f"bath mode frequency must be > 0, got {self.frequency!r}")


@dataclass(frozen=True)
class Discrete:
    modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def couplings(self):
        return np.array([m.coupling for m in self.modes], dtype=float)

    @property
    def masses(self):
        return np.array([m.mass for m in self.modes], dtype=float)

    @property
    def frequencies(self):
        return np.array([m.frequency for m in self.modes], dtype=float)

    def weights(self):
        """Delta-function weights C_n^2 / (2 m_n w_n) of I(w)."""
        c, m, w = self.couplings, self.masses, self.frequencies
        return c**2 / (2.0 * m * w)


@dataclass(frozen=True)
class _Ohmic:
    gamma0: float
    cutoff: float
    mass: float = 1.0

    def __post_init__(self):
        if not (self.gamma0 >= 0 and math.isfinite(self.gamma0)):
            raise ConfigurationError(f"gamma0 must be finite and >= 0, got {self.gamma0!r}")
        if not (self.cutoff > 0 and math.isfinite(self.cutoff)):
            # without a finite cutoff gamma(0) = int I/w diverges
            raise ConfigurationError(f"Ohmic cutoff must be finite and > 0 (divergent kernel), got {self.cutoff!r}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ConfigurationError(f"Ohmic mass parameter must be > 0, got {self.mass!r}")

    @property
    def prefactor(self):
        return 2.0 / math.pi * self.mass * self.gamma0


@dataclass(frozen=True)
class OhmicExpCutoff(_Ohmic):
    """I(w) = (2/pi) M gamma0 w exp(-w/Lambda)."""

    def cutoff_fn(self, x):
        return np.exp(-x)

    @property
    def omega_max(self):
        # exp(-40) ~ 4e-18 relative tail
        return 40.0 * self.cutoff


@dataclass(frozen=True)
class OhmicSharpCutoff(_Ohmic):
    """I(w) = (2/pi) M gamma0 w for w <= Lambda, zero above."""

    def cutoff_fn(self, x):
        return np.where(np.asarray(x) <= 1.0, 1.0, 0.0)

    @property
    def omega_max(self):
        return self.cutoff


SpectralDensity = Union[Discrete, OhmicExpCutoff, OhmicSharpCutoff]


@dataclass(frozen=True)
class BathSpec:
    spectral: SpectralDensity = field(default_factory=Discrete)
    beta: float = math.inf
    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        if not isinstance(self.spectral, (Discrete, OhmicExpCutoff, OhmicSharpCutoff)):
            raise ConfigurationError(f"unknown spectral density {self.spectral!r}")
        if not (self.beta > 0) or math.isnan(self.beta):
            raise ConfigurationError(f"beta must be > 0 or inf, got {self.beta!r}")
        for name in ("hbar", "kB"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def temperature(self):
        return 0.0 if math.isinf(self.beta) else 1.0 / (self.kB * self.beta)

    @property
    def is_discrete(self):
        return isinstance(self.spectral, Discrete)

    def with_beta(self, beta):
        return BathSpec(self.spectral, beta, self.hbar, self.kB)


def coth_half(x):
    """coth(x/2) for x >= 0 with asymptotic branches; x = inf gives 1."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    small = x < _COTH_SMALL
    mid = (~small) & (x <= _COTH_LARGE)
    # x -> 0 (or subnormal) overflows to inf, the correct limit
    with np.errstate(divide="ignore", over="ignore"):
        out[small] = 2.0 / x[small] + x[small] / 6.0
    out[mid] = 1.0 / np.tanh(0.5 * x[mid])
    return out if out.ndim else float(out)


def spectral_density(spectral, omega):
    """Continuum I(w). Discrete baths are sums of deltas and have no pointwise value."""
    if isinstance(spectral, Discrete):
        raise UsageError("discrete spectral densities are delta sums; use the mode weights")
    w = np.asarray(omega, dtype=float)
    return spectral.prefactor * w * spectral.cutoff_fn(w / spectral.cutoff)


def cosine_transform(f, s, omega_max, *, base_width=None, order=16, rtol=1e-11, max_doublings=8):
    """int_0^omega_max f(w) cos(w s) dw by composite Gauss-Legendre panels.

    Panel width never exceeds pi/(4 s) and is halved until two successive
    refinements agree to ``rtol`` relative to int |f|.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if base_width is None:
        base_width = omega_max / 32.0
    x, wts = np.polynomial.legendre.leggauss(order)
    out = np.empty_like(s)
    order_idx = np.argsort(np.abs(s))
    chunk = 128

    def panels(width, s_chunk):
        n = max(1, int(math.ceil(omega_max / width)))
        edges = np.linspace(0.0, omega_max, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        om = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        ww = (half[:, None] * wts[None, :]).ravel()
        fw = f(om) * ww
        return np.cos(np.outer(s_chunk, om)) @ fw, np.sum(np.abs(fw))

    for start in range(0, len(s), chunk):
        idx = order_idx[start:start + chunk]
        sc = s[idx]
        smax = float(np.max(np.abs(sc)))
        width = base_width if smax == 0 else min(base_width, math.pi / (4.0 * smax))
        prev, scale = panels(width, sc)
        for _ in range(max_doublings):
            width *= 0.5
            cur, scale = panels(width, sc)
            done = np.max(np.abs(cur - prev)) <= rtol * max(scale, 1e-300)
            prev = cur
            if done:
                break
        out[idx] = prev
    return out


def _mode_sum(spectral, weights, s):
    s = np.asarray(s, dtype=float)
    w = spectral.frequencies
    if w.size == 0:
        return np.zeros_like(s) if s.ndim else 0.0
    flat = np.atleast_1d(s).ravel()
    vals = np.cos(np.outer(flat, w)) @ weights
    return vals.reshape(s.shape) if s.ndim else float(vals[0])


def gamma_kernel(bath, s):
    """gamma(s) = int dw I(w)/w cos(w s); accepts scalar or array s."""
    sp = bath.spectral
    s = np.abs(np.asarray(s, dtype=float))
    if not np.all(np.isfinite(s)):
        raise UsageError("gamma_kernel requires finite s")
    if isinstance(sp, Discrete):
        return _mode_sum(sp, sp.weights() / sp.frequencies if sp.modes else np.zeros(0), s)
    lam = sp.cutoff
    if isinstance(sp, OhmicExpCutoff):
        out = sp.prefactor * lam / (1.0 + (lam * s) ** 2)
    else:
        # sin(lam s)/s
        out = sp.prefactor * lam * np.sinc(lam * s / math.pi)
    return out if out.ndim else float(out)


def _nu_exp_cutoff(sp, hb_beta, s, terms=64):
    """Matsubara-type resummation of nu for the exponential cutoff.

    coth(x/2) = 1 + 2 sum_k exp(-k x) turns every term into
    int_0^inf w exp(-c w) dw = 1/c^2 with complex c.  The k-sum is summed
    explicitly up to ``terms`` and closed with an Euler-Maclaurin tail.
    """
    a = 1.0 / sp.cutoff - 1j * np.atleast_1d(s)
    total = 1.0 / a**2
    if math.isfinite(hb_beta):
        k = np.arange(1, terms)
        head = np.sum(1.0 / (a[:, None] + k[None, :] * hb_beta) ** 2, axis=1)
        z = a + terms * hb_beta
        # sum_{k>=K} (z + (k-K) h)^-2 ~ int + f/2 - f'/12 + f'''/720
        tail = 1.0 / (hb_beta * z) + 0.5 / z**2 + hb_beta / (6.0 * z**3) - hb_beta**3 / (30.0 * z**5)
        total = total + 2.0 * (head + tail)
    return sp.prefactor * np.real(total)


def nu_kernel(bath, s):
    """nu(s) = int dw I(w) coth(hbar w beta/2) cos(w s); accepts scalar or array s."""
    sp = bath.spectral
    s_arr = np.abs(np.asarray(s, dtype=float))
    if not np.all(np.isfinite(s_arr)):
        raise UsageError("nu_kernel requires finite s")
    hb_beta = bath.hbar * bath.beta
    if isinstance(sp, Discrete):
        if not sp.modes:
            return np.zeros_like(s_arr) if s_arr.ndim else 0.0
        return _mode_sum(sp, sp.weights() * coth_half(hb_beta * sp.frequencies), s_arr)
    if isinstance(sp, OhmicExpCutoff):
        out = _nu_exp_cutoff(sp, hb_beta, s_arr.ravel()).reshape(s_arr.shape)
        return out if out.ndim else float(out)
    integrand = lambda w: spectral_density(sp, w) * coth_half(hb_beta * w)
    out = cosine_transform(integrand, s_arr.ravel(), sp.omega_max).reshape(s_arr.shape)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """gamma and nu sampled on s = 0, dt, 2 dt, ...; both kernels are even in s."""

    dt: float
    gamma: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        n = np.array(self.nu, dtype=float)
        if g.shape != n.shape or g.ndim != 1 or g.size == 0:
            raise UsageError("gamma and nu samples must be equal-length 1-d arrays")
        if not self.dt > 0:
            raise UsageError(f"dt must be > 0, got {self.dt!r}")
        g.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "nu", n)

    def __len__(self):
        return self.gamma.size

    @property
    def s(self):
        return np.arange(len(self)) * self.dt

    @property
    def s_max(self):
        return (len(self) - 1) * self.dt

    def covers(self, t, ds):
        """Check that this table can serve a grid of step ``ds`` up to ``t``."""
        if not math.isclose(ds, self.dt, rel_tol=1e-9, abs_tol=0.0):
            raise UsageError(f"grid mismatch: kernel dt={self.dt!r} but solver ds={ds!r}")
        n = grid_index(t, ds)
        if n + 1 > len(self):
            raise UsageError(f"kernel table covers s <= {self.s_max!r}, need {t!r}")
        return n

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "gamma", "nu"])
            for i in range(len(self)):
                w.writerow([format_float(i * self.dt), format_float(self.gamma[i]), format_float(self.nu[i])])


def grid_index(t, ds):
    """Index n with n*ds == t to within rounding, else UsageError."""
    if not (ds > 0):
        raise UsageError(f"ds must be > 0, got {ds!r}")
    n = int(round(t / ds))
    if n < 0 or abs(n * ds - t) > 1e-9 * max(1.0, abs(t)):
        raise UsageError(f"t={t!r} is not on the grid of step ds={ds!r}")
    return n


def tabulate_kernels(bath, dt, s_max):
    if not dt > 0:
        raise UsageError(f"dt must be > 0, got {dt!r}")
    if not s_max >= dt * (1 - 1e-12):
        raise UsageError(f"s_max must be >= dt, got s_max={s_max!r}, dt={dt!r}")
    n = int(math.floor(s_max / dt + 1e-9))
    s = np.arange(n + 1) * dt
    return KernelTable(dt, np.asarray(gamma_kernel(bath, s)), np.asarray(nu_kernel(bath, s)))


def eta_moment(kernels, g, dg=None):
    """int_0^t eta(t-s) g(s) ds with t = (len(g)-1)*dt.

    Evaluated as gamma(t) g(0) - gamma(0) g(t) + int_0^t gamma(t-s) g'(s) ds
    (trapezoidal), so eta itself is never differenced.  ``dg`` defaults to a
    second-order finite-difference derivative of ``g``.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise UsageError("g must be a non-empty 1-d sample array")
    n = g.size - 1
    if n + 1 > len(kernels):
        raise UsageError(f"grid mismatch: g has {g.size} samples, kernel table only {len(kernels)}")
    if n == 0:
        return 0.0
    if dg is None:
        dg = np.gradient(g, kernels.dt, edge_order=2) if n >= 2 else np.full(2, (g[1] - g[0]) / kernels.dt)
    dg = np.asarray(dg, dtype=float)
    if dg.shape != g.shape:
        raise UsageError("grid mismatch: g and dg must have the same length")
    gam = kernels.gamma
    conv = kernels.dt * (np.dot(gam[n::-1], dg) - 0.5 * (gam[n] * dg[0] + gam[0] * dg[n]))
    return float(gam[n] * g[0] - gam[0] * g[n] + conv)


def discretize(spectral, n_modes, omega_max=None, mass=1.0):
    """Gauss-Legendre discretization of a continuum into ``n_modes`` oscillators.

    Nodes on [0, omega_max] (default 5 Lambda, or Lambda for the sharp cutoff);
    C_n^2/(2 m w_n) = weight_n * I(w_n).
    """
    if isinstance(spectral, Discrete):
        return spectral
    if n_modes < 1:
        raise ConfigurationError("n_modes must be >= 1")
    if omega_max is None:
        omega_max = spectral.cutoff if isinstance(spectral, OhmicSharpCutoff) else 5.0 * spectral.cutoff
    x, wts = np.polynomial.legendre.leggauss(n_modes)
    om = 0.5 * omega_max * (x + 1.0)
    ww = 0.5 * omega_max * wts
    c = np.sqrt(2.0 * mass * om * ww * spectral_density(spectral, om))
    return Discrete(tuple(BathMode(float(ci), mass, float(wi)) for ci, wi in zip(c, om)))


_SPECTRAL_KEYS = {
    "discrete": {"type", "modes"},
    "ohmic_exp": {"type", "gamma0", "cutoff", "M"},
    "ohmic_sharp": {"type", "gamma0", "cutoff", "M"},
}


def _number(d, key, default=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigurationError(f"missing required key {key!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"{key!r} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigurationError(f"{key!r} must be finite, got {v!r}")
    return float(v)


def bath_from_dict(d):
    """Parse ``{"spectral": {...}, "beta": x|"inf", "hbar": x, "kB": x}``."""
    if not isinstance(d, dict):
        raise ConfigurationError("bath section must be an object")
    unknown = set(d) - {"spectral", "beta", "hbar", "kB"}
    if unknown:
        raise ConfigurationError(f"unknown bath keys: {sorted(unknown)}")
    sp = d.get("spectral")
    if not isinstance(sp, dict) or "type" not in sp:
        raise ConfigurationError("bath.spectral must be an object with a 'type'")
    kind = sp["type"]
    if kind not in _SPECTRAL_KEYS:
        raise ConfigurationError(f"unknown spectral type {kind!r}")
    unknown = set(sp) - _SPECTRAL_KEYS[kind]
    if unknown:
        raise ConfigurationError(f"unknown keys for spectral type {kind!r}: {sorted(unknown)}")
    if kind == "discrete":
        modes = sp.get("modes", [])
        if not isinstance(modes, list):
            raise ConfigurationError("discrete 'modes' must be a list")
        parsed = []
        for m in modes:
            if not isinstance(m, dict) or set(m) - {"C", "m", "omega"}:
                raise ConfigurationError(f"bath mode must have keys C, m, omega: {m!r}")
            parsed.append(BathMode(_number(m, "C"), _number(m, "m", 1.0), _number(m, "omega")))
        spectral = Discrete(tuple(parsed))
    else:
        cls = OhmicExpCutoff if kind == "ohmic_exp" else OhmicSharpCutoff
        spectral = cls(_number(sp, "gamma0"), _number(sp, "cutoff"), _number(sp, "M", 1.0))
    beta = d.get("beta", "inf")
    if beta == "inf":
        beta = math.inf
    elif isinstance(beta, bool) or not isinstance(beta, (int, float)) or not math.isfinite(beta):
        raise ConfigurationError(f"beta must be a finite number or \"inf\", got {beta!r}")
    return BathSpec(spectral, float(beta), _number(d, "hbar", 1.0), _number(d, "kB", 1.0))


def bath_to_dict(bath):
    sp = bath.spectral
    if isinstance(sp, Discrete):
        spectral = {"type": "discrete", "modes": [{"C": m.coupling, "m": m.mass, "omega": m.frequency} for m in sp.modes]}
    else:
        kind = "ohmic_exp" if isinstance(sp, OhmicExpCutoff) else "ohmic_sharp"
        spectral = {"type": kind, "gamma0": sp.gamma0, "cutoff": sp.cutoff, "M": sp.mass}
    return {"spectral": spectral, "beta": "inf" if math.isinf(bath.beta) else bath.beta, "hbar": bath.hbar, "kB": bath.kB}
