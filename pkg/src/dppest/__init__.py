"""Simulation and second-order estimation of determinantal point processes on rectangles."""

from .inference.covariance import CovarianceEstimate, covariance_and_ci
from .inference.equations import (
    estimating_function,
    integral_term,
    pair_sum,
    poisson_score,
    second_order_equation,
    sensitivity_H,
    simultaneous_equation,
    simultaneous_rho,
    stationary_equation_e2,
)
from .inference.fitting import FitConfig, FitResult, fit, fit_simultaneous, fit_two_step
from .inference.testfunctions import AdaptiveCL, TruncatedCL, f_adaptive, f_truncated, parse_method, weight_w
from .kernels import (
    BesselType,
    Gaussian,
    Homogeneous,
    KernelModel,
    LogLinear,
    PointPattern,
    adaptive_range,
    existence_check,
    joint_intensity,
    kernel_eval,
    pair_correlation,
)
from .numerics import SeedSpec, Window, bessel_j1, brent_root, damped_newton, distance_cdf, gauss_legendre_2d
from .sampler import sample_dpp, sample_poisson

__version__ = "0.1.0"
