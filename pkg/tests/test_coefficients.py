import math

import numpy as np
import pytest

from conftest import discrete_bath
from hpzqbm.bath import BathSpec, Discrete, OhmicExpCutoff, tabulate_kernels
from hpzqbm.coefficients import (
    CoefficientSet,
    CoefficientTrajectory,
    ExactCoefficientEngine,
    HpzCoefficients,
    coefficients_exact,
    coefficients_ohmic_fp,
    coefficients_weak,
    trajectory,
    uniform_grid,
)
from hpzqbm.elementary import SystemParams
from hpzqbm.errors import AccuracyError, ConfigurationError, UsageError
from hpzqbm.oracle import FullPhaseSpaceModel, extract_coefficients

RESONANT_C = 0.49856870898324734  # du1(t) = 0 at t = 5.5 for M = m = Omega = omega = 1


def test_zero_at_t0(three_mode):
    sys, bath = three_mode
    k = tabulate_kernels(bath, 1e-3, 1.0)
    assert coefficients_exact(sys, bath, k, 0.0, 1e-3).as_tuple() == (0, 0, 0, 0)
    assert coefficients_weak(sys, k, 0.0).as_tuple() == (0, 0, 0, 0)


def test_decoupled_coefficients_vanish(decoupled):
    sys, bath = decoupled
    tr = trajectory(sys, bath, "exact", uniform_grid(4.0, 0.5), 1e-3)
    for c in "ABCD":
        assert not np.any(getattr(tr, c))
    tr = trajectory(sys, bath, "weak", uniform_grid(4.0, 0.5), 1e-3)
    assert not np.any(tr.D)


def test_exact_matches_oracle(three_mode):
    sys, bath = three_mode
    k = tabulate_kernels(bath, 1e-3, 6.0)
    eng = ExactCoefficientEngine(sys, bath, k, 6.0, 1e-3)
    model = FullPhaseSpaceModel(sys, bath)
    for t in (0.5, 2.0, 3.7, 5.5):
        ours = np.array(eng.at(t).as_tuple())
        ref = np.array(extract_coefficients(model, bath, sys, t, derivative="exact").as_tuple())
        np.testing.assert_allclose(ours, ref, rtol=2e-6)


def test_single_mode_matches_oracle_to_1e5(single_mode):
    sys, bath = single_mode
    ds = 5e-4
    k = tabulate_kernels(bath, ds, 4.0)
    model = FullPhaseSpaceModel(sys, bath)
    for t in (1.0, 2.5, 4.0):
        ours = np.array(coefficients_exact(sys, bath, k, t, ds).as_tuple())
        ref = np.array(extract_coefficients(model, bath, sys, t, fd_step=ds).as_tuple())
        np.testing.assert_allclose(ours, ref, rtol=1e-5)


def test_exact_converges_to_second_order(three_mode):
    sys, bath = three_mode
    model = FullPhaseSpaceModel(sys, bath)
    ref = np.array(extract_coefficients(model, bath, sys, 2.0, derivative="exact").as_tuple())
    errs = []
    for ds in (2e-3, 1e-3):
        k = tabulate_kernels(bath, ds, 2.0)
        errs.append(np.max(np.abs(np.array(coefficients_exact(sys, bath, k, 2.0, ds).as_tuple()) - ref)))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_weak_coupling_agrees_at_small_coupling():
    sys = SystemParams(1.0, 1.0)
    bath = discrete_bath([0.02], [2.0], beta=1.0)
    k = tabulate_kernels(bath, 1e-3, 5.0)
    ex = coefficients_exact(sys, bath, k, 5.0, 1e-3)
    wk = coefficients_weak(sys, k, 5.0)
    scale = 0.02**2
    for a, b in zip(ex.as_tuple(), wk.as_tuple()):
        assert abs(a - b) <= 1e-3 * scale


def test_weak_free_particle_limit():
    # Omega = 0 uses sin(Omega s)/Omega -> s
    sys = SystemParams(1.0, 0.0)
    bath = discrete_bath([0.1], [1.0], beta=1.0)
    k = tabulate_kernels(bath, 1e-3, 2.0)
    c = coefficients_weak(sys, k, 2.0)
    s = np.arange(2001) * 1e-3
    assert c.C == pytest.approx(np.trapezoid(k.nu[:2001] * s, dx=1e-3))
    assert all(math.isfinite(x) for x in c.as_tuple())


def test_ohmic_fp_constants():
    sys = SystemParams(1.0, 5.0, Omega_ren=1.0)
    c = coefficients_ohmic_fp(sys, 0.2, 30.0, kB=1.0, t=1.0)
    assert (c.B, c.C, c.D) == (0.4, 0.0, 2 * 0.2 * 30.0)
    assert c.A == -math.inf
    with pytest.raises(ConfigurationError):
        coefficients_ohmic_fp(SystemParams(1.0, 1.0), 0.2, 30.0)


def test_ohmic_fp_trajectory_rows_constant():
    sys = SystemParams(1.0, 5.0, Omega_ren=1.0)
    bath = BathSpec(OhmicExpCutoff(0.2, 100.0), beta=1 / 50)
    tr = trajectory(sys, bath, "ohmic_fp", uniform_grid(1.0, 0.25), 1e-3)
    np.testing.assert_array_equal(tr.B, 0.4)
    np.testing.assert_array_equal(tr.C, 0.0)
    np.testing.assert_allclose(tr.D, 2 * 0.2 * 50.0)
    with pytest.raises(ConfigurationError):
        trajectory(sys, discrete_bath([0.1], [1.0]), "ohmic_fp", [0.0], 1e-3)


def test_hpz_conversion_round_trip():
    cs = CoefficientSet(1.0, -0.3, 0.2, 0.05, 0.7)
    hp = cs.to_hpz(hbar=2.0, M=3.0)
    assert hp.Gamma == 0.1 and hp.delta_Omega2 == pytest.approx(-0.1)
    back = hp.to_coefficient_set(hbar=2.0, M=3.0)
    np.testing.assert_allclose(back.as_tuple(), cs.as_tuple(), rtol=1e-15)
    assert HpzCoefficients(0.0, 0.0, 0.0, 1.0, 1.0).f is None


def test_resonant_row_is_flagged():
    sys = SystemParams(1.0, 1.0)
    bath = discrete_bath([RESONANT_C], [1.0])
    tr = trajectory(sys, bath, "exact", uniform_grid(6.0, 0.1), 1e-3)
    assert tr.singular_times() == [5.5]
    i = tr.flagged()[0]
    assert tr.row(i) is None and math.isnan(tr.A[i])
    assert tr.row(i - 1) is not None and tr.row(i + 1) is not None


def test_csv_and_json_round_trip(tmp_path):
    sys = SystemParams(1.0, 1.0)
    bath = discrete_bath([RESONANT_C], [1.0])
    tr = trajectory(sys, bath, "exact", uniform_grid(6.0, 0.5), 1e-3)
    p = tmp_path / "c.csv"
    tr.to_csv(p)
    text = p.read_text().splitlines()
    assert text[0] == ",".join(CoefficientTrajectory.HEADER)
    flagged_line = text[1 + 11]
    assert flagged_line.startswith("5.5,,,,,,,,,exact,")
    back = CoefficientTrajectory.from_csv(p)
    np.testing.assert_array_equal(back.B, tr.B)
    assert back.flags == tr.flags
    again = CoefficientTrajectory.from_json(tr.to_json())
    np.testing.assert_array_equal(again.D, tr.D)


def test_threads_do_not_change_results(single_mode):
    sys, bath = single_mode
    grid = uniform_grid(2.0, 0.1)
    a = trajectory(sys, bath, "weak", grid, 1e-3, threads=1)
    b = trajectory(sys, bath, "weak", grid, 1e-3, threads=4)
    np.testing.assert_array_equal(a.C, b.C)


def test_grid_errors(single_mode):
    sys, bath = single_mode
    with pytest.raises(ConfigurationError):
        trajectory(sys, bath, "markov", [0.0], 1e-3)
    with pytest.raises(UsageError):
        trajectory(sys, bath, "exact", [0.0, 0.1, 0.3], 1e-3)
    with pytest.raises(UsageError):
        uniform_grid(1.0, 0.3)


def test_under_resolved_trajectory_reports_accuracy():
    sys = SystemParams(1.0, 1.0)
    bath = discrete_bath([1.0], [8.0])
    k = tabulate_kernels(bath, 0.05, 3.0)
    with pytest.raises(AccuracyError) as info:
        trajectory(sys, bath, "exact", uniform_grid(3.0, 0.5), 0.05, kernels=k, tol=1e-8)
    assert info.value.suggested_ds < 0.05


def test_row_errors_carry_index(single_mode):
    sys, bath = single_mode
    k = tabulate_kernels(bath, 1e-3, 1.0)
    with pytest.raises(ConfigurationError, match="row 3"):
        trajectory(sys, bath, "weak", uniform_grid(2.0, 0.5), 1e-3, kernels=k)
