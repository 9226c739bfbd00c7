"""Brute-force reference: the system plus a finite discrete bath propagated exactly.

The total Hamiltonian is quadratic, so a Gaussian phase-space state is carried
by a linear symplectic map U(t) = exp(G t) with G = J H.  Reduced moments are the
(q, p) block; coefficients are recovered by matching exact moment rates to the
moment equations.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .bath import BathSpec, Discrete, coth_half
from .coefficients import CoefficientSet
from .dynamics import GaussianMomentState, MomentSeries
from .errors import ConfigurationError, ExtractionError, SymplecticityError, UsageError

SYMPLECTIC_TOL = 1e-10


class FullPhaseSpaceModel:
    """Linear generator of the system+bath flow, ordering (q, q_1..q_N, p, p_1..p_N).

    Propagators are cached per time and shared between threads.
    """

    def __init__(self, sys, bath):
        if not isinstance(bath, BathSpec) or not isinstance(bath.spectral, Discrete):
            raise ConfigurationError("the exact oracle needs a discrete bath")
        self.sys, self.bath = sys, bath
        sp = bath.spectral
        N = len(sp.modes)
        d = N + 1
        self.n_modes, self.dof = N, d
        H = np.zeros((2 * d, 2 * d))
        H[0, 0] = sys.M * sys.Omega**2
        H[d, d] = 1.0 / sys.M
        for i, mode in enumerate(sp.modes):
            H[1 + i, 1 + i] = mode.mass * mode.frequency**2
            H[d + 1 + i, d + 1 + i] = 1.0 / mode.mass
            H[0, 1 + i] = H[1 + i, 0] = mode.coupling
        J = np.zeros((2 * d, 2 * d))
        J[:d, d:] = np.eye(d)
        J[d:, :d] = -np.eye(d)
        self.H, self.J = H, J
        self.G = J @ H
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def dimension(self):
        return 2 * self.dof

    def recovered_hamiltonian(self):
        """H_sym = -J G; symmetric iff G is a Hamiltonian generator."""
        return -self.J @ self.G

    def hamiltonian_defect(self):
        Hs = self.recovered_hamiltonian()
        return float(np.max(np.abs(Hs - Hs.T)))

    def symplectic_defect(self, U):
        return float(np.max(np.abs(U @ self.J @ U.T - self.J)))

    def propagator(self, t):
        if not (t >= 0 and math.isfinite(t)):
            raise UsageError(f"t must be finite and >= 0, got {t!r}")
        key = float(t)
        with self._lock:
            U = self._cache.get(key)
        if U is not None:
            return U
        U = expm(self.G * key)
        defect = self.symplectic_defect(U)
        if defect > SYMPLECTIC_TOL:
            raise SymplecticityError(f"propagator at t={key!r} violates symplecticity by {defect:.3e}")
        U.setflags(write=False)
        with self._lock:
            self._cache.setdefault(key, U)
        return U

    def reduced_index(self):
        return [0, self.dof]


@dataclass(frozen=True, eq=False)
class FullGaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.array(self.mean, dtype=float)
        c = np.array(self.cov, dtype=float)
        if m.ndim != 1 or c.shape != (m.size, m.size):
            raise ValueError("mean and covariance shapes do not match")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(c))):
            raise ValueError("state must be finite")
        scale = max(float(np.max(np.abs(c))), 1e-300)
        if np.max(np.abs(c - c.T)) > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (c + c.T))) < -1e-10 * scale:
            raise ValueError("covariance is not positive semidefinite")
        m.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)


def thermal_state(model, system_state=None):
    """Factorized initial state: the given system Gaussian times the thermal bath."""
    st = system_state if system_state is not None else GaussianMomentState(0.0, 0.0, 0.0, 0.0, 0.0)
    d = model.dof
    bath = model.bath
    mean = np.zeros(2 * d)
    cov = np.zeros((2 * d, 2 * d))
    mean[0], mean[d] = st.mean_q, st.mean_p
    cov[0, 0], cov[d, d] = st.sigma_qq, st.sigma_pp
    cov[0, d] = cov[d, 0] = st.sigma_qp
    for i, mode in enumerate(bath.spectral.modes):
        c = float(coth_half(bath.hbar * mode.frequency * bath.beta))
        cov[1 + i, 1 + i] = bath.hbar / (2.0 * mode.mass * mode.frequency) * c
        cov[d + 1 + i, d + 1 + i] = bath.hbar * mode.mass * mode.frequency / 2.0 * c
    return FullGaussianState(mean, cov)


def propagate_full(model, state0, t):
    U = model.propagator(t)
    cov = U @ state0.cov @ U.T
    return FullGaussianState(U @ state0.mean, 0.5 * (cov + cov.T))


def reduced_moments(state):
    d = state.mean.size // 2
    return GaussianMomentState(
        float(state.mean[0]), float(state.mean[d]),
        float(state.cov[0, 0]), float(state.cov[d, d]), float(state.cov[0, d]),
    )


def reduced_series(model, initial, times):
    """Exact reduced moments at ``times``; same layout as ``dynamics.evolve`` output."""
    state0 = thermal_state(model, initial)
    vals = [reduced_moments(propagate_full(model, state0, float(t))).as_vector() for t in times]
    return MomentSeries(np.asarray(times, dtype=float), np.array(vals))


def energy(model, state):
    """Total energy <H> = (1/2) tr(H Sigma) + (1/2) mean^T H mean."""
    return 0.5 * float(np.trace(model.H @ state.cov)) + 0.5 * float(state.mean @ model.H @ state.mean)


def purity_invariant(state):
    """det Sigma, conserved by symplectic flow (purity is (hbar/2)^n / sqrt(det Sigma))."""
    return float(np.linalg.det(state.cov))


def recurrence_time(spectral):
    """2 pi / (largest gap between adjacent mode frequencies); inf with fewer than two modes."""
    if not isinstance(spectral, Discrete):
        raise ConfigurationError("recurrence time is defined only for discrete baths")
    w = np.sort(spectral.frequencies)
    if w.size < 2:
        return math.inf
    gap = float(np.max(np.diff(w)))
    return math.inf if gap == 0.0 else 2.0 * math.pi / gap


def _reduced_blocks(model, U, S0):
    """System 2x2 blocks of U S0 U^T and of its exact time derivative."""
    idx = np.ix_(model.reduced_index(), model.reduced_index())
    S = U @ S0 @ U.T
    dS = model.G @ S + S @ model.G.T
    return S[idx], dS[idx]


def extract_coefficients(model, bath, sys, t, fd_step=None, derivative="central", cond_limit=1e10):
    """Recover (A, B, C, D) at t from exact moment trajectories.

    First moments from the initial means (1, 0) and (0, 1) give a 2x2 system for
    (M Omega^2 + A, B); second moments started from a zero system covariance
    give C and D.  ``derivative="central"`` uses central differences with step
    ``fd_step`` (default: one-sided at t < fd_step is refused); ``"exact"``
    differentiates through the generator.
    """
    if derivative not in ("central", "exact"):
        raise UsageError("derivative must be 'central' or 'exact'")
    if t == 0:
        return CoefficientSet(0.0, 0.0, 0.0, 0.0, 0.0)
    M = sys.M
    d = model.dof
    sel = model.reduced_index()
    state0 = thermal_state(model)
    S0 = state0.cov

    if derivative == "exact":
        U = model.propagator(t)
        GU = model.G @ U
        Phi, dPhi = U[np.ix_(sel, sel)], GU[np.ix_(sel, sel)]
        s2, ds2 = _reduced_blocks(model, U, S0)
    else:
        if fd_step is None or not fd_step > 0:
            raise UsageError("central differences need fd_step > 0")
        if t - fd_step < 0:
            raise UsageError(f"t={t!r} is closer to 0 than fd_step={fd_step!r}")
        Up, U, Um = (model.propagator(t + fd_step), model.propagator(t), model.propagator(t - fd_step))
        Phi = U[np.ix_(sel, sel)]
        dPhi = (Up[np.ix_(sel, sel)] - Um[np.ix_(sel, sel)]) / (2.0 * fd_step)
        s2, _ = _reduced_blocks(model, U, S0)
        sp, _ = _reduced_blocks(model, Up, S0)
        sm, _ = _reduced_blocks(model, Um, S0)
        ds2 = (sp - sm) / (2.0 * fd_step)

    # columns of Phi are the exact mean trajectories (q, p) from the two initial means
    if np.linalg.cond(Phi) > cond_limit:
        raise ExtractionError(
            f"first-moment pair is nearly degenerate at t={t!r}; use different initial means or another t"
        )
    # d<p>/dt = -k <q> - B <p> for both columns:  [k, B] Phi = -dPhi[1]
    k, B = np.linalg.solve(Phi.T, -dPhi[1])
    sqq, spp, sqp = s2[0, 0], s2[1, 1], s2[0, 1]
    C = ds2[0, 1] - spp / M + k * sqq + B * sqp
    D = 0.5 * ds2[1, 1] + k * sqp + B * spp
    A = k - M * sys.Omega**2
    return CoefficientSet(float(t), float(A), float(B), float(C), float(D))


def two_oscillator_closed_form(M, Omega, m, omega, C):
    """Propagator for one system oscillator coupled to one mode, via normal modes.

    Returns ``U(t)`` as a callable, built from the eigen-decomposition of the
    mass-weighted stiffness matrix (independent of the matrix exponential).
    """
    K = np.array([[M * Omega**2, C], [C, m * omega**2]])
    minv_sqrt = np.diag([1.0 / math.sqrt(M), 1.0 / math.sqrt(m)])
    w2, V = np.linalg.eigh(minv_sqrt @ K @ minv_sqrt)
    if np.any(w2 <= 0):
        raise ConfigurationError("coupling too strong: total potential is not positive definite")
    w = np.sqrt(w2)
    T = minv_sqrt @ V  # q = T x
    Tinv = V.T @ np.diag([math.sqrt(M), math.sqrt(m)])
    Minv = np.diag([1.0 / M, 1.0 / m])

    def U(t):
        c, s = np.cos(w * t), np.sin(w * t)
        # x'' = -w^2 x with x = Tinv q, x' = Tinv Minv p
        qq = T @ np.diag(c) @ Tinv
        qp = T @ np.diag(s / w) @ Tinv @ Minv
        pq = -np.linalg.inv(Minv) @ T @ np.diag(w * s) @ Tinv
        pp = np.linalg.inv(Minv) @ T @ np.diag(c) @ Tinv @ Minv
        return np.block([[qq, qp], [pq, pp]])

    return U
