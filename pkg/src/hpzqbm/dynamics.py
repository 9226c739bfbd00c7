"""Gaussian reduced states and their evolution under the time-dependent Wigner equation.

The flow has drift linear in (q, p) and phase-space-constant diffusion, so a
Gaussian stays Gaussian and the state is carried exactly by its means and
covariance.  Means are integrated as raw moments, the covariance as central
moments (the C and D sources enter there directly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularTrajectoryError, UsageError, WignerEvaluationError
from .io import read_csv, write_csv

MOMENT_HEADER = ["t", "mean_q", "mean_p", "sigma_qq", "sigma_pp", "sigma_qp", "uncertainty_product"]


@dataclass(frozen=True)
class GaussianMomentState:
    mean_q: float = 0.0
    mean_p: float = 0.0
    sigma_qq: float = 0.5
    sigma_pp: float = 0.5
    sigma_qp: float = 0.0

    def __post_init__(self):
        vals = (self.mean_q, self.mean_p, self.sigma_qq, self.sigma_pp, self.sigma_qp)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"moments must be finite: {vals}")
        if self.sigma_qq < 0 or self.sigma_pp < 0:
            raise ValueError("variances must be >= 0")
        scale = max(self.sigma_qq * self.sigma_pp, self.sigma_qp**2, 1e-300)
        if self.uncertainty_product < -1e-12 * scale:
            raise ValueError("covariance matrix is not positive semidefinite")

    @property
    def uncertainty_product(self):
        return self.sigma_qq * self.sigma_pp - self.sigma_qp**2

    @property
    def mean(self):
        return np.array([self.mean_q, self.mean_p])

    @property
    def covariance(self):
        return np.array([[self.sigma_qq, self.sigma_qp], [self.sigma_qp, self.sigma_pp]])

    def as_vector(self):
        return np.array([self.mean_q, self.mean_p, self.sigma_qq, self.sigma_pp, self.sigma_qp])

    @classmethod
    def from_vector(cls, x):
        return cls(*(float(v) for v in x))

    @classmethod
    def coherent(cls, q=0.0, p=0.0, M=1.0, Omega=1.0, hbar=1.0):
        """Minimum-uncertainty state of the oscillator (M, Omega) displaced to (q, p)."""
        return cls(q, p, hbar / (2 * M * Omega), hbar * M * Omega / 2, 0.0)


def restoring(coef, sys):
    """M Omega^2 + A, or M Omega_ren^2 when A is the divergent Ohmic sentinel."""
    if math.isfinite(coef.A):
        return sys.M * sys.Omega**2 + coef.A
    if sys.Omega_ren is None:
        raise UsageError("infinite frequency shift requires Omega_ren")
    return sys.M * sys.Omega_ren**2


def _rhs(x, k, B, C, D, M):
    mq, mp, sqq, spp, sqp = x
    return np.array([
        mp / M,
        -k * mq - B * mp,
        2.0 * sqp / M,
        -2.0 * k * sqp - 2.0 * B * spp + 2.0 * D,
        spp / M - k * sqq - B * sqp + C,
    ])


def moment_rhs(state, coef, sys):
    """Rates [d mean_q, d mean_p, d sigma_qq, d sigma_pp, d sigma_qp]/dt."""
    return _rhs(state.as_vector(), restoring(coef, sys), coef.B, coef.C, coef.D, sys.M)


@dataclass(frozen=True, eq=False)
class MomentSeries:
    t: np.ndarray
    values: np.ndarray  # shape (n, 5): mean_q, mean_p, sigma_qq, sigma_pp, sigma_qp

    def __len__(self):
        return self.t.size

    def state(self, i):
        return GaussianMomentState.from_vector(self.values[i])

    def column(self, name):
        if name == "uncertainty_product":
            return self.values[:, 2] * self.values[:, 3] - self.values[:, 4] ** 2
        return self.values[:, MOMENT_HEADER.index(name) - 1]

    def to_csv(self, path):
        up = self.column("uncertainty_product")
        rows = (list(map(float, [self.t[i], *self.values[i], up[i]])) for i in range(len(self)))
        write_csv(path, MOMENT_HEADER, rows)

    @classmethod
    def from_csv(cls, path):
        header, rows = read_csv(path)
        if header != MOMENT_HEADER:
            raise UsageError(f"{path}: not a moment series CSV")
        arr = np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(MOMENT_HEADER))
        return cls(arr[:, 0], arr[:, 1:6])


class _CoefficientInterpolator:
    """Piecewise-linear coefficients between trajectory rows."""

    def __init__(self, traj, sys):
        self.t = traj.t
        self.dt = traj.spacing
        M = sys.M
        if all(p == "ohmic_fp" for p in traj.provenance):
            if sys.Omega_ren is None:
                raise UsageError("ohmic_fp trajectory requires Omega_ren")
            k = np.full(len(traj), M * sys.Omega_ren**2)
        else:
            k = M * sys.Omega**2 + traj.A
        self.cols = np.stack([k, traj.B, traj.C, traj.D])

    def __call__(self, t):
        if self.dt == 0.0:
            return self.cols[:, 0]
        x = t / self.dt
        i = min(int(math.floor(x + 1e-9)), self.t.size - 2)
        f = x - i
        if abs(f) < 1e-9:
            return self.cols[:, i]
        if abs(f - 1.0) < 1e-9:
            return self.cols[:, i + 1]
        return (1.0 - f) * self.cols[:, i] + f * self.cols[:, i + 1]


def evolve(initial, traj, sys, dt_out, t_end=None, step=None):
    """RK4 integration of the moment equations along a coefficient trajectory.

    The internal step defaults to twice the trajectory spacing (so every RK4
    stage lands on a stored row) refined until it divides ``dt_out``.
    Refuses to integrate across a flagged row.
    """
    if not dt_out > 0:
        raise UsageError(f"dt_out must be > 0, got {dt_out!r}")
    t_last = float(traj.t[-1])
    if t_end is None:
        t_end = t_last
    if t_end > t_last * (1 + 1e-12) + 1e-12:
        raise UsageError(f"trajectory ends at {t_last!r}, cannot evolve to {t_end!r}")
    n_out = int(round(t_end / dt_out))
    if abs(n_out * dt_out - t_end) > 1e-9 * max(1.0, t_end):
        raise UsageError(f"t_end={t_end!r} is not a multiple of dt_out={dt_out!r}")
    for i in traj.flagged():
        if traj.t[i] <= t_end + 1e-12:
            raise SingularTrajectoryError(float(traj.t[i]), traj.flags[i])
    coef = _CoefficientInterpolator(traj, sys)
    M = sys.M
    # fastest system timescale from the restoring force actually in use
    omega_fast = math.sqrt(float(np.max(np.abs(coef.cols[0]))) / M)
    if len(traj) > 1 and omega_fast > 0 and traj.spacing > 2.0 * math.pi / (4.0 * omega_fast):
        raise UsageError(
            f"trajectory spacing {traj.spacing!r} is coarser than a quarter system period; refine dt"
        )

    if step is None:
        base = 2.0 * traj.spacing if len(traj) > 1 else dt_out
        sub = max(1, int(math.ceil(dt_out / base - 1e-9)))
    else:
        sub = max(1, int(math.ceil(dt_out / step - 1e-9)))
    h = dt_out / sub

    def f(t, x):
        k, B, C, D = coef(t)
        return _rhs(x, k, B, C, D, M)

    x = initial.as_vector().astype(float)
    out = np.empty((n_out + 1, 5))
    out[0] = x
    for j in range(1, n_out + 1):
        for i in range(sub):
            t0 = (j - 1) * dt_out + i * h
            k1 = f(t0, x)
            k2 = f(t0 + 0.5 * h, x + 0.5 * h * k1)
            k3 = f(t0 + 0.5 * h, x + 0.5 * h * k2)
            k4 = f(t0 + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[j] = x
    return MomentSeries(np.arange(n_out + 1) * dt_out, out)


@dataclass(frozen=True)
class WignerGaussian:
    """Normalized Gaussian Wigner function of a moment state."""

    state: GaussianMomentState

    def __call__(self, q, p):
        return wigner_eval(self, q, p)


def wigner_eval(state, q, p):
    """Bivariate Gaussian density with the state's mean and covariance."""
    st = state.state if isinstance(state, WignerGaussian) else state
    det = st.uncertainty_product
    scale = max(st.sigma_qq * st.sigma_pp, 1e-300)
    if not (st.sigma_qq > 0 and st.sigma_pp > 0 and det > 1e-14 * scale):
        raise WignerEvaluationError("covariance matrix is singular or indefinite")
    dq = np.asarray(q, dtype=float) - st.mean_q
    dp = np.asarray(p, dtype=float) - st.mean_p
    quad = (st.sigma_pp * dq**2 - 2.0 * st.sigma_qp * dq * dp + st.sigma_qq * dp**2) / det
    out = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    return out if out.ndim else float(out)


def wigner_grid(state, n=41, width=4.0):
    """W on an n x n grid spanning +-width standard deviations around the mean."""
    st = state.state if isinstance(state, WignerGaussian) else state
    q = st.mean_q + width * math.sqrt(st.sigma_qq) * np.linspace(-1.0, 1.0, n)
    p = st.mean_p + width * math.sqrt(st.sigma_pp) * np.linspace(-1.0, 1.0, n)
    Q, P = np.meshgrid(q, p, indexing="ij")
    return q, p, wigner_eval(st, Q, P)


def write_wigner_csv(path, state, n=41, width=4.0):
    q, p, W = wigner_grid(state, n, width)
    rows = ((float(q[i]), float(p[j]), float(W[i, j])) for i in range(q.size) for j in range(p.size))
    write_csv(path, ["q", "p", "W"], rows)
