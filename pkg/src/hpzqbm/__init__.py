"""Exact coefficients of the quantum Brownian motion master equation, Gaussian
reduced dynamics, and a brute-force system+bath reference."""

from .bath import (
    BathMode,
    BathSpec,
    Discrete,
    KernelTable,
    OhmicExpCutoff,
    OhmicSharpCutoff,
    discretize,
    eta_moment,
    gamma_kernel,
    nu_kernel,
    tabulate_kernels,
)
from .coefficients import (
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
from .config import RunConfig, config_from_dict, load_config
from .dynamics import GaussianMomentState, MomentSeries, WignerGaussian, evolve, moment_rhs, wigner_eval
from .elementary import ElementarySolution, GreenEvaluator, SystemParams, elementary, solve_ivp_pair
from .oracle import FullGaussianState, FullPhaseSpaceModel, extract_coefficients, propagate_full, reduced_moments

__version__ = "0.1.0"
