"""Brownian oscillator in an Ohmic bath.

Closed-form response functions and bath sums, quantum and classical
Fokker-Planck coefficients, Gaussian propagators, a conservative grid solver
for the time-local position-space FPE, and trajectory-ensemble cross-checks.
"""

from .errors import (
    CFLViolation,
    DegenerateVariance,
    GridMismatch,
    HbarZero,
    InvalidC,
    InvalidInput,
    NegativeDiffusion,
    NoConvergence,
    NonFiniteCoefficient,
    NonFiniteState,
    NonPositiveCurvature,
    NonPositiveMass,
    NonPositiveTemperature,
    PoleAtChiQZero,
    PoleWindow,
    QbmError,
    TailNotBounded,
)
from .model import PhysicalParams, derive, split_lambdas
from .special import (
    Hyp2F1Args,
    hyp2f1,
    hyp2f1_ex,
    noise_kernel_closed,
    noise_kernel_modes,
    xi_q0_closed,
    xi_q0_sum,
)
from .response import (
    SusceptibilitySet,
    chi_q,
    chi_q_dot,
    chi_v,
    chi_v_dot,
    drift_velocity,
    omega_drift,
    pole_times,
    susceptibilities,
)
from .coefficients import (
    CoefficientTable,
    D1Result,
    build_table,
    d1_classical,
    d1_quantum,
    d1_quantum_detail,
    d_cl_closed,
    d_fpe,
    sigma1_classical,
    sigma1_quantum,
    sigma_cl_closed,
    sigma_q,
)
from .propagator import GaussianDensity, density, fpe_residual, maxwell_average_check
from .fpe import DensityField, SolveResult, SolverConfig, solve, step
from .sde import EnsembleStats, equivalence_report, simulate_langevin, simulate_reduced
from .validation import CheckResult, ValidationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "QbmError", "InvalidInput", "NonPositiveMass", "NonPositiveTemperature",
    "NonPositiveCurvature",
    "HbarZero", "NoConvergence", "InvalidC", "TailNotBounded", "PoleAtChiQZero",
    "NonFiniteCoefficient", "NegativeDiffusion", "PoleWindow", "CFLViolation",
    "GridMismatch", "DegenerateVariance", "NonFiniteState",
    # model
    "PhysicalParams", "derive", "split_lambdas",
    # special functions and bath sums
    "Hyp2F1Args", "hyp2f1", "hyp2f1_ex", "xi_q0_sum", "xi_q0_closed",
    "noise_kernel_modes", "noise_kernel_closed",
    # response
    "chi_q", "chi_v", "chi_q_dot", "chi_v_dot", "susceptibilities",
    "SusceptibilitySet", "omega_drift", "drift_velocity", "pole_times",
    # coefficients
    "d1_classical", "sigma1_classical", "sigma_cl_closed", "d_cl_closed",
    "D1Result", "d1_quantum", "d1_quantum_detail", "sigma1_quantum",
    "sigma_q", "d_fpe", "CoefficientTable", "build_table",
    # propagator
    "GaussianDensity", "density", "fpe_residual", "maxwell_average_check",
    # fpe
    "SolverConfig", "DensityField", "SolveResult", "step", "solve",
    # sde
    "EnsembleStats", "simulate_reduced", "simulate_langevin", "equivalence_report",
    # validation
    "CheckResult", "ValidationReport", "run_suite",
]
