"""Sandwich covariance and normal confidence intervals from replicated estimating functions."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np


class SingularH(ArithmeticError):
    pass


@dataclass
class CovarianceEstimate:
    sigma: np.ndarray  # empirical Var(e_n)
    covariance: np.ndarray  # |W|^-2 H^-1 Sigma H^-T
    se: np.ndarray
    ci: np.ndarray | None  # (p, 2), present when theta_hat is given
    n_replicates: int


def sandwich(H, sigma, area: float) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if not np.all(np.isfinite(H)) or np.linalg.cond(H) > 1e14:
        raise SingularH("sensitivity matrix is singular")
    Hinv = np.linalg.inv(H)
    cov = Hinv @ np.atleast_2d(sigma) @ Hinv.T / area**2
    return 0.5 * (cov + cov.T)


def covariance_and_ci(e_values, H, area: float, theta_hat=None, level: float = 0.95,
                      min_replicates: int = 30) -> CovarianceEstimate:
    """Sigma_n from the rows of ``e_values``, then Cov(theta_hat) = |W|^-2 H^-1 Sigma_n H^-T.

    ``theta_hat`` may be one estimate (p,) or an ensemble (n, p); CIs are
    theta_hat -/+ z * se in either case.
    """
    e = np.atleast_2d(np.asarray(e_values, dtype=float))
    if e.shape[0] < min_replicates:
        raise ValueError(f"need at least {min_replicates} replicates, got {e.shape[0]}")
    sigma = np.atleast_2d(np.cov(e, rowvar=False))
    cov = sandwich(H, sigma, area)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    ci = None
    if theta_hat is not None:
        z = NormalDist().inv_cdf(0.5 + 0.5 * level)
        th = np.asarray(theta_hat, dtype=float)
        ci = np.stack([th - z * se, th + z * se], axis=-1)
    return CovarianceEstimate(sigma, cov, se, ci, e.shape[0])


def coverage(ci: np.ndarray, truth) -> np.ndarray:
    """Fraction of intervals covering ``truth``, per coordinate; ``ci`` has shape (n, p, 2)."""
    ci = np.asarray(ci, dtype=float)
    t = np.asarray(truth, dtype=float)
    return np.mean((ci[..., 0] <= t) & (t <= ci[..., 1]), axis=0)
