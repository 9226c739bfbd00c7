"""Property-based checks of invariants that must hold for any admissible input."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import discrete_bath
from hpzqbm.bath import coth_half, tabulate_kernels
from hpzqbm.coefficients import CoefficientSet, CoefficientTrajectory, coefficients_exact, uniform_grid
from hpzqbm.config import config_from_dict
from hpzqbm.dynamics import GaussianMomentState, evolve, moment_rhs, wigner_eval
from hpzqbm.elementary import SystemParams
from hpzqbm.errors import ConfigurationError
from hpzqbm.io import format_float
from hpzqbm.oracle import FullPhaseSpaceModel, energy, propagate_full, purity_invariant, reduced_moments, thermal_state

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-3, 1e3)


@st.composite
def physical_states(draw, hbar=1.0):
    """Gaussian states obeying sigma_qq sigma_pp - sigma_qp^2 >= hbar^2/4."""
    sqq = draw(st.floats(0.05, 5.0))
    c = draw(st.floats(-2.0, 2.0))
    excess = draw(st.floats(0.0, 3.0))
    sqp = c * sqq
    spp = (hbar**2 / 4 + excess + sqp**2) / sqq
    return GaussianMomentState(draw(st.floats(-3, 3)), draw(st.floats(-3, 3)), sqq, spp, sqp)


@st.composite
def small_baths(draw):
    n = draw(st.integers(1, 3))
    w = draw(st.lists(st.floats(0.3, 3.0), min_size=n, max_size=n, unique=True))
    c = draw(st.lists(st.floats(0.01, 0.2), min_size=n, max_size=n))
    beta = draw(st.one_of(st.just(math.inf), st.floats(0.2, 10.0)))
    return discrete_bath(c, w, beta=beta)


@given(st.floats(1e-300, 1e4))
def test_coth_half_bounds(x):
    v = coth_half(x)
    assert v >= 1.0
    assert v >= (2.0 / x) * (1 - 1e-12)


@given(finite)
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


@given(physical_states())
def test_wigner_symmetric_and_peaked(s):
    dq, dp = 0.37 * math.sqrt(s.sigma_qq), -0.21 * math.sqrt(s.sigma_pp)
    a = wigner_eval(s, s.mean_q + dq, s.mean_p + dp)
    b = wigner_eval(s, s.mean_q - dq, s.mean_p - dp)
    assert a == pytest.approx(b, rel=1e-12)
    assert 0 < a <= wigner_eval(s, s.mean_q, s.mean_p)


@given(st.floats(0.1, 5.0), st.floats(0.0, 3.0))
def test_zero_coefficients_zero_state_zero_rate(M, Om):
    z = GaussianMomentState(0, 0, 0, 0, 0)
    assert not moment_rhs(z, CoefficientSet(0, 0, 0, 0, 0), SystemParams(M, Om)).any()


@settings(max_examples=25, deadline=None)
@given(physical_states(), physical_states(), st.floats(-2, 2))
def test_mean_evolution_is_linear(s1, s2, alpha):
    t = uniform_grid(3.0, 0.05)
    f = lambda v: np.full_like(t, v)
    traj = CoefficientTrajectory(t, f(0.1), f(0.2), f(0.03), f(0.4), ("exact",) * t.size, ("",) * t.size)
    comb = GaussianMomentState(alpha * s1.mean_q + s2.mean_q, alpha * s1.mean_p + s2.mean_p, 1.0, 1.0, 0.0)
    a, b, c = (evolve(s, traj, SystemParams(), 0.5).values for s in (s1, s2, comb))
    np.testing.assert_allclose(c[:, :2], alpha * a[:, :2] + b[:, :2], atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(small_baths(), st.floats(0.5, 2.0), physical_states(), st.floats(0.1, 20.0))
def test_oracle_invariants(bath, Om, s, t):
    model = FullPhaseSpaceModel(SystemParams(1.0, Om), bath)
    st0 = thermal_state(model, s)
    out = propagate_full(model, st0, t)
    assert model.symplectic_defect(model.propagator(t)) <= 1e-10
    assert energy(model, out) == pytest.approx(energy(model, st0), rel=1e-9)
    assert purity_invariant(out) == pytest.approx(purity_invariant(st0), rel=1e-9)
    assert reduced_moments(out).uncertainty_product >= 0.25 - 1e-10


@settings(max_examples=10, deadline=None)
@given(small_baths(), st.floats(0.5, 2.0))
def test_exact_coefficients_zero_at_t0(bath, Om):
    k = tabulate_kernels(bath, 0.01, 0.01)
    assert coefficients_exact(SystemParams(1.0, Om), bath, k, 0.0, 0.01).as_tuple() == (0, 0, 0, 0)


@given(st.sampled_from(["sytem", "bath_", "Mode", "grid"]))
def test_config_rejects_unknown_top_level_keys(key):
    d = {
        "system": {"Omega": 1.0},
        "bath": {"spectral": {"type": "discrete", "modes": []}},
        "grids": {"ds": 0.01, "t_max": 1.0},
        key: {},
    }
    with pytest.raises(ConfigurationError):
        config_from_dict(d)


@given(st.one_of(st.just(math.nan), st.just(math.inf), st.just(-math.inf)))
def test_config_rejects_non_finite_numbers(bad):
    d = {"system": {"Omega": bad}, "bath": {"spectral": {"type": "discrete", "modes": []}}, "grids": {"ds": 0.01, "t_max": 1.0}}
    with pytest.raises(ConfigurationError):
        config_from_dict(d)


@given(st.floats(-1.0, 1.0), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_state_rejects_indefinite_covariance(r, a, b):
    assume(abs(r) < 0.999)
    ok = GaussianMomentState(0, 0, a, b, r * math.sqrt(a * b))
    assert ok.uncertainty_product >= -1e-12
    with pytest.raises(ValueError):
        GaussianMomentState(0, 0, a, b, 1.01 * math.sqrt(a * b) + 1e-9)
