"""Elementary functions u1, u2 of the homogeneous integro-differential equation

    S''(s) + Omega^2 S(s) + (2/M) int_0^s eta(s - l) S(l) dl = 0,

with u1(0)=1, u1(t)=0 and u2(0)=0, u2(t)=1.

The boundary problem is solved by superposition: two initial-value problems
(v1: S=1, S'=0; v2: S=0, S'=1) are integrated once on the full grid and
combined for each final time t.  Because the equation is linear this is exact
and the same IVP basis serves every t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .bath import grid_index
from .errors import AccuracyError, ConfigurationError, DegeneracyError, SingularBoundaryError, UsageError
from .io import write_csv
from .parallel import map_ordered

DEFAULT_TOL = 1e-5
DEFAULT_SINGULAR_TOL = 1e-5


@dataclass(frozen=True)
class SystemParams:
    M: float = 1.0
    Omega: float = 1.0
    Omega_ren: float | None = None

    def __post_init__(self):
        if not (self.M > 0 and math.isfinite(self.M)):
            raise ConfigurationError(f"M must be finite and > 0, got {self.M!r}")
        if not (self.Omega >= 0 and math.isfinite(self.Omega)):
            raise ConfigurationError(f"Omega must be finite and >= 0, got {self.Omega!r}")
        if self.Omega_ren is not None and not (self.Omega_ren >= 0 and math.isfinite(self.Omega_ren)):
            raise ConfigurationError(f"Omega_ren must be finite and >= 0, got {self.Omega_ren!r}")


@dataclass(frozen=True, eq=False)
class IVPBasis:
    """v1, v2 with first and second derivatives and memory integrals on s = k*ds.

    ``memory[i, k]`` is int_0^{s_k} eta(s_k - l) v_i(l) dl.
    """

    ds: float
    v: np.ndarray
    dv: np.ndarray
    acc: np.ndarray
    memory: np.ndarray
    residual: float

    def __post_init__(self):
        for name in ("v", "dv", "acc", "memory"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.v.shape[1]

    @property
    def s(self):
        return np.arange(len(self)) * self.ds

    @property
    def t_max(self):
        return (len(self) - 1) * self.ds

    v1 = property(lambda self: self.v[0])
    v2 = property(lambda self: self.v[1])
    dv1 = property(lambda self: self.dv[0])
    dv2 = property(lambda self: self.dv[1])

    def wronskian(self):
        """v1 v2' - v1' v2 on the grid (constant only when eta = 0)."""
        return self.v[0] * self.dv[1] - self.dv[0] * self.v[1]

    def _spline(self, i, deriv=False):
        s = self.s
        if deriv:
            return CubicHermiteSpline(s, self.dv[i], self.acc[i])
        return CubicHermiteSpline(s, self.v[i], self.dv[i])

    def retarded_green(self, s1, s2, deriv=False):
        """Resolvent G(s1, s2) = v2(s1 - s2) for s1 > s2, else 0.

        This is the Green function of the inhomogeneous Volterra equation
        with zero initial data; ``deriv`` gives dG/ds1 = v2'(s1 - s2).
        """
        x = np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float)
        spl = self._spline(1, deriv)
        out = np.where(x > 0, spl(np.clip(x, 0.0, self.t_max)), 0.0)
        return out if out.ndim else float(out)


def solve_ivp_pair(sys, kernels, t_final, ds, tol=DEFAULT_TOL, check=True):
    """Integrate v1, v2 on [0, t_final] with the implicit trapezoidal rule.

    The memory term uses the integration-by-parts form
    gamma(s) S(0) - gamma(0) S(s) + int_0^s gamma(s-l) S'(l) dl, whose
    trapezoidal sum only needs S' (carried by the integrator).  Each step is a
    2x2 linear solve: the exact fixed point of the trapezoidal corrector.
    """
    n_steps = kernels.covers(t_final, ds)
    if n_steps < 1:
        raise UsageError(f"t_final must be >= ds, got t_final={t_final!r}")
    N = n_steps + 1
    M = sys.M
    g = kernels.gamma[:N]
    om2 = sys.Omega**2
    h = 0.5 * ds

    v = np.zeros((2, N))
    dv = np.zeros((2, N))
    acc = np.zeros((2, N))
    mem = np.zeros((2, N))
    v[:, 0] = (1.0, 0.0)
    dv[:, 0] = (0.0, 1.0)
    acc[:, 0] = -om2 * v[:, 0]

    # acc_n = a S_n + b S'_n + c_n, with c_n the explicit history part
    a = -(om2 - 2.0 * g[0] / M)
    b = -(ds / M) * g[0]
    lhs_inv = np.linalg.inv(np.array([[1.0, -h], [-h * a, 1.0 - h * b]]))
    for n in range(1, N):
        hist = dv[:, 1:n] @ g[n - 1:0:-1] if n > 1 else 0.0
        mem_explicit = g[n] * v[:, 0] + ds * (0.5 * g[n] * dv[:, 0] + hist)
        c = -(2.0 / M) * mem_explicit
        rhs = np.stack([v[:, n - 1] + h * dv[:, n - 1], dv[:, n - 1] + h * (acc[:, n - 1] + c)])
        sol = lhs_inv @ rhs
        v[:, n] = sol[0]
        dv[:, n] = sol[1]
        mem[:, n] = mem_explicit - g[0] * v[:, n] + 0.5 * ds * g[0] * dv[:, n]
        acc[:, n] = -om2 * v[:, n] - (2.0 / M) * mem[:, n]

    res = _residual(v, dv, acc, ds)
    basis = IVPBasis(ds, v, dv, acc, mem, res)
    if check and res > 10.0 * tol:
        suggested = ds * math.sqrt(tol / res)
        raise AccuracyError(
            f"integro-differential residual {res:.3g} exceeds 10*tol={10 * tol:.3g} with ds={ds!r}; "
            f"try ds <= {suggested:.3g}",
            suggested_ds=suggested,
        )
    return basis


def _residual(v, dv, acc, ds):
    """Max interior defect of S'' + Omega^2 S + (2/M) memory, with S'' from
    central differences of S', relative to max(1, max|S''|)."""
    if v.shape[1] < 3:
        return 0.0
    r = (dv[:, 2:] - dv[:, :-2]) / (2.0 * ds) - acc[:, 1:-1]
    return float(np.max(np.abs(r)) / max(1.0, float(np.max(np.abs(acc)))))


@dataclass(frozen=True, eq=False)
class ElementarySolution:
    t_final: float
    ds: float
    u1: np.ndarray
    u2: np.ndarray
    du1: np.ndarray
    du2: np.ndarray
    ddu1: np.ndarray
    ddu2: np.ndarray
    residual: float

    @property
    def s(self):
        return np.arange(self.u1.size) * self.ds

    du1_at_0 = property(lambda self: float(self.du1[0]))
    du2_at_0 = property(lambda self: float(self.du2[0]))
    du1_at_t = property(lambda self: float(self.du1[-1]))
    du2_at_t = property(lambda self: float(self.du2[-1]))

    def boundary_defect(self):
        return max(abs(self.u1[0] - 1.0), abs(self.u1[-1]), abs(self.u2[0]), abs(self.u2[-1] - 1.0))

    def to_csv(self, path):
        rows = zip(self.s, self.u1, self.u2, self.du1, self.du2)
        write_csv(path, ["s", "u1", "u2", "du1", "du2"], rows)


def elementary(sys, kernels, t_final, ds, basis=None, tol=DEFAULT_TOL, singular_tol=DEFAULT_SINGULAR_TOL):
    """u1, u2 on [0, t_final] from the IVP basis.

    u1 = v1 - (v1(t)/v2(t)) v2,  u2 = v2 / v2(t).  Raises
    :class:`SingularBoundaryError` when v2(t) vanishes (conjugate point).
    """
    if basis is None:
        basis = solve_ivp_pair(sys, kernels, t_final, ds, tol=tol)
    elif not math.isclose(basis.ds, ds, rel_tol=1e-9):
        raise UsageError(f"grid mismatch: basis ds={basis.ds!r}, requested ds={ds!r}")
    n = grid_index(t_final, ds)
    if n < 1 or n >= len(basis):
        raise UsageError(f"t_final={t_final!r} outside the solved range (0, {basis.t_max!r}]")
    sl = slice(0, n + 1)
    v1, v2 = basis.v[0, sl], basis.v[1, sl]
    v2t = v2[-1]
    if abs(v2t) <= singular_tol * float(np.max(np.abs(v2))):
        raise SingularBoundaryError(t_final)
    r = v1[-1] / v2t
    return ElementarySolution(
        t_final=t_final,
        ds=ds,
        u1=v1 - r * v2,
        u2=v2 / v2t,
        du1=basis.dv[0, sl] - r * basis.dv[1, sl],
        du2=basis.dv[1, sl] / v2t,
        ddu1=basis.acc[0, sl] - r * basis.acc[1, sl],
        ddu2=basis.acc[1, sl] / v2t,
        residual=basis.residual,
    )


def elementary_many(sys, kernels, t_values, ds, threads=1, tol=DEFAULT_TOL, singular_tol=DEFAULT_SINGULAR_TOL):
    """Elementary solutions for several final times, sharing one IVP basis.

    Returns a list in input order; singular times yield the exception instance
    in place of a solution.
    """
    basis = solve_ivp_pair(sys, kernels, max(t_values), ds, tol=tol)

    def one(t):
        try:
            return elementary(sys, kernels, t, ds, basis=basis, singular_tol=singular_tol)
        except SingularBoundaryError as exc:
            return exc

    return map_ordered(one, list(t_values), threads)


class GreenEvaluator:
    """Wronskian-ratio Green functions built from u1, u2.

        G(s1, s2) = [u1(s2) u2(s1) - u2(s2) u1(s1)] / [u1(s2) u2'(s2) - u1'(s2) u2(s2)]

    G1 is supported on s1 > s2, G2 on s2 > s1.  The denominator is evaluated
    at s2 as written; for a non-local kernel it is not constant in s2 and this
    G differs from the Volterra resolvent (see ``IVPBasis.retarded_green``).
    """

    def __init__(self, solution):
        self.solution = solution
        s = solution.s
        self._u = [CubicHermiteSpline(s, solution.u1, solution.du1), CubicHermiteSpline(s, solution.u2, solution.du2)]
        self._du = [CubicHermiteSpline(s, solution.du1, solution.ddu1), CubicHermiteSpline(s, solution.du2, solution.ddu2)]

    def _check(self, *xs):
        t = self.solution.t_final
        for x in xs:
            if np.any(np.asarray(x) < -1e-12) or np.any(np.asarray(x) > t * (1 + 1e-12)):
                raise UsageError(f"Green function arguments must lie in [0, {t!r}]")

    def _ratio(self, s1, s2, deriv):
        self._check(s1, s2)
        u1, u2 = self._u
        du1, du2 = self._du
        a1 = du1 if deriv else u1
        a2 = du2 if deriv else u2
        num = u1(s2) * a2(s1) - u2(s2) * a1(s1)
        p, q = u1(s2) * du2(s2), du1(s2) * u2(s2)
        den = p - q
        scale = np.abs(p) + np.abs(q)
        if np.any(np.abs(den) < 1e-12 * np.maximum(scale, 1e-300)):
            raise DegeneracyError("Wronskian denominator vanishes")
        return num / den

    def G1(self, s1, s2):
        s1, s2 = np.asarray(s1, float), np.asarray(s2, float)
        out = np.where(s1 > s2, self._ratio(s1, s2, False), 0.0)
        return out if out.ndim else float(out)

    def G2(self, s1, s2):
        s1, s2 = np.asarray(s1, float), np.asarray(s2, float)
        out = np.where(s2 > s1, self._ratio(s1, s2, False), 0.0)
        return out if out.ndim else float(out)

    def dG1(self, s1, s2):
        """dG1/ds1; the one-sided limit at s1 = s2 is included (equals 1)."""
        s1, s2 = np.asarray(s1, float), np.asarray(s2, float)
        out = np.where(s1 >= s2, self._ratio(s1, s2, True), 0.0)
        return out if out.ndim else float(out)


def green_G1(ev, s1, s2):
    return ev.G1(s1, s2)


def green_G2(ev, s1, s2):
    return ev.G2(s1, s2)


def green_dG1(ev, s1, s2):
    return ev.dG1(s1, s2)
