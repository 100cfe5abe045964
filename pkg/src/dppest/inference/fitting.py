"""Two-step and simultaneous fitting of separable DPP models."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..kernels import (
    FAMILIES,
    Homogeneous,
    IntensityModel,
    KernelModel,
    LogLinear,
    PointPattern,
)
from ..numerics import (
    MaxIterations,
    NoBracket,
    SingularJacobian,
    brent_root,
    damped_newton,
    gauss_legendre_2d,
)
from .equations import (
    PairCache,
    PairIntegral,
    poisson_jacobian,
    poisson_score,
    second_order_equation,
    sensitivity_H,
    simultaneous_equation,
    simultaneous_rho,
)
from .testfunctions import AdaptiveCL, DegeneratePair, TestFunction, parse_method

CONVERGED = "Converged"
NO_BRACKET = "NoBracket"
MAX_ITERATIONS = "MaxIterations"
SINGULAR_JACOBIAN = "SingularJacobian"
NOT_CONVERGED = "NotConverged"
STATUSES = (CONVERGED, NO_BRACKET, MAX_ITERATIONS, SINGULAR_JACOBIAN, NOT_CONVERGED)


@dataclass
class FitConfig:
    layout: str = "two-step"
    family: str = "bessel"
    intensity: str = "homogeneous"  # or "loglinear"
    covariates: tuple[str, ...] = ("1", "x")
    n_scan: int = 32
    delta: float = 1e-6
    tol_scalar: float = 1e-9
    tol_vector: float = 1e-7
    maxiter: int = 200
    window_order: int = 24
    radial_order: int = 16
    angular_order: int = 8
    rect_order: int = 10
    compute_H: bool = True

    def __post_init__(self):
        if self.layout not in ("two-step", "simultaneous"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.intensity not in ("homogeneous", "loglinear"):
            raise ValueError(f"unknown intensity {self.intensity!r}")
        if self.layout == "simultaneous" and self.intensity != "homogeneous":
            raise ValueError("the simultaneous layout is implemented for homogeneous intensities")
        self.covariates = tuple(self.covariates)


@dataclass
class FitResult:
    theta: list[float]
    names: list[str]
    status: str
    residual: float
    iterations: int
    practical_range: float | None
    H: list[list[float]] | None = None
    covariance: list[list[float]] | None = None
    ci: list[list[float]] | None = None
    method: str = ""
    layout: str = "two-step"
    family: str = "bessel"
    model: dict | None = None
    elapsed: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def alpha(self) -> float:
        return self.theta[-1]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(**d)

    def summary(self) -> str:
        vals = " ".join(f"{n}={v:.6g}" for n, v in zip(self.names, self.theta))
        rng = "" if self.practical_range is None else f" range={self.practical_range:.4g}"
        return f"{self.status} {self.method} {self.layout} {vals} residual={self.residual:.3g} iter={self.iterations}{rng}"


# ---------------------------------------------------------------------------
# Step 1


def fit_intensity(pattern: PointPattern, config: FitConfig) -> tuple[IntensityModel, int]:
    """Root of the Poisson score; closed form when homogeneous."""
    window = pattern.window
    if pattern.n == 0:
        raise NoBracket("empty pattern: the Poisson score has no root")
    if config.intensity == "homogeneous":
        return Homogeneous(pattern.n / window.area), 0
    template = LogLinear(tuple(0.0 for _ in config.covariates), config.covariates)
    quad = gauss_legendre_2d(window, config.window_order)
    x0 = np.zeros(len(config.covariates))
    x0[list(config.covariates).index("1")] = math.log(pattern.n / window.area) if "1" in config.covariates else 0.0
    box = (np.full_like(x0, -50.0), np.full_like(x0, 50.0))
    beta, it = damped_newton(
        lambda b: poisson_score(pattern, template.with_params(b), quad),
        x0,
        jacobian=lambda b: poisson_jacobian(pattern, template.with_params(b), quad),
        box=box,
        tol=config.tol_vector,
        maxiter=config.maxiter,
    )
    return template.with_params(beta), it


# ---------------------------------------------------------------------------
# Scalar root selection


def alpha_upper(family: str, rho_max: float, delta: float = 1e-6) -> float:
    """Largest admissible alpha, shrunk by the factor (1 - delta)."""
    return (1.0 - delta) * FAMILIES[family](1.0).max_alpha(rho_max)


def select_root(f, grid: np.ndarray, tol: float, maxiter: int = 200) -> tuple[float, str, int, np.ndarray]:
    """Bracket scan on ``grid`` then Brent.

    Sign changes from + to - are roots of a maximisation problem; among them
    the one with the largest cumulative trapezoid integral of ``f`` wins. If
    no such change exists any sign change is used. If ``f`` keeps one sign the
    quasi-objective is monotone and the boundary it increases toward is
    returned with status NoBracket.
    """
    vals = np.array([f(a) for a in grid])
    evals = len(grid)
    quasi = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])
    sign = np.sign(vals)
    change = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    down = [k for k in change if vals[k] >= 0 >= vals[k + 1]]
    cand = down or list(change)
    if not cand:
        k = len(grid) - 1 if vals[0] > 0 else 0
        return float(grid[k]), NO_BRACKET, evals, vals
    k = max(cand, key=lambda j: max(quasi[j], quasi[j + 1]))
    counter = [0]

    def g(a):
        counter[0] += 1
        return f(a)

    try:
        root = brent_root(g, grid[k], grid[k + 1], tol=tol, maxiter=maxiter, flo=vals[k], fhi=vals[k + 1])
    except MaxIterations:
        return float(grid[k]), MAX_ITERATIONS, evals + counter[0], vals
    return float(root), CONVERGED, evals + counter[0], vals


def _scan_grid(upper: float, n: int) -> np.ndarray:
    return upper * np.arange(1, n + 1) / n


# ---------------------------------------------------------------------------
# Fits


def _range(tf: TestFunction, corr) -> float:
    return float(tf.radius(corr))


def fit_two_step(pattern: PointPattern, tf: TestFunction | str, config: FitConfig | None = None) -> FitResult:
    """Intensity from the Poisson score, then alpha from the second-order equation."""
    config = config or FitConfig()
    tf = parse_method(tf) if isinstance(tf, str) else tf
    t0 = time.perf_counter()
    corr0 = FAMILIES[config.family](1.0)
    names = _names(config)
    base = dict(method=tf.label, layout="two-step", family=config.family)
    try:
        intensity, it1 = fit_intensity(pattern, config)
    except (NoBracket, MaxIterations, SingularJacobian) as exc:
        status = exc.__class__.__name__ if not isinstance(exc, NoBracket) else NO_BRACKET
        return FitResult([math.nan] * len(names), names, status, math.inf, 0, None,
                         elapsed=time.perf_counter() - t0, message=str(exc), **base)
    upper = alpha_upper(config.family, intensity.sup(pattern.window), config.delta)
    cache = PairCache(pattern)
    integ = PairIntegral(pattern.window, config.angular_order, config.rect_order)

    def u(alpha: float) -> float:
        model = KernelModel(intensity, corr0.with_alpha(alpha), pattern.window, check=False)
        return float(second_order_equation(pattern, model, tf, "two-step", cache, integ)[0])

    grid = _scan_grid(upper, config.n_scan)
    try:
        alpha, status, it2, _ = select_root(u, grid, config.tol_scalar, config.maxiter)
    except DegeneratePair as exc:
        return FitResult([math.nan] * len(names), names, NOT_CONVERGED, math.inf, it1, None,
                         elapsed=time.perf_counter() - t0, message=str(exc), **base)
    model = KernelModel(intensity, corr0.with_alpha(alpha), pattern.window, check=False)
    theta = model.theta
    quad = gauss_legendre_2d(pattern.window, config.window_order) if isinstance(intensity, LogLinear) else None
    s = poisson_score(pattern, intensity, quad)
    res = float(max(np.max(np.abs(s)) if isinstance(intensity, LogLinear) else 0.0, abs(u(alpha))))
    H = None
    if config.compute_H and np.isfinite(theta).all():
        H = sensitivity_H(model, "two-step", tf, integ, quad, config.radial_order).tolist()
    return FitResult(
        theta.tolist(), names, status, res, it1 + it2, _range(tf, model.correlation), H,
        model=model.to_dict(), elapsed=time.perf_counter() - t0, **base,
    )


def fit_simultaneous(pattern: PointPattern, tf: TestFunction | str, config: FitConfig | None = None) -> FitResult:
    """Stationary simultaneous fit: profile equation in alpha, then rho from the quotient formula."""
    config = config or FitConfig(layout="simultaneous")
    tf = parse_method(tf) if isinstance(tf, str) else tf
    t0 = time.perf_counter()
    names = _names(config)
    base = dict(method=tf.label, layout="simultaneous", family=config.family)
    if pattern.n < 2:
        return FitResult([math.nan, math.nan], names, NO_BRACKET, math.inf, 0, None,
                         elapsed=time.perf_counter() - t0, message="fewer than two points", **base)
    cache = PairCache(pattern)
    upper = alpha_upper(config.family, pattern.n / pattern.window.area, config.delta)

    def e(alpha: float) -> float:
        return float(simultaneous_equation(pattern, alpha, family=config.family, tf=tf, cache=cache)[0])

    grid = _scan_grid(upper, config.n_scan)
    alpha, status, it, _ = select_root(e, grid, config.tol_scalar, config.maxiter)
    rho = simultaneous_rho(pattern, alpha, family=config.family, tf=tf, cache=cache)
    corr = FAMILIES[config.family](alpha)
    msg = ""
    if not rho > 0:
        status, msg = NOT_CONVERGED, "no pairs inside the support"
        rho = math.nan
    elif rho * corr.spectral_sup > 1.0 and status == CONVERGED:
        status, msg = NOT_CONVERGED, "estimate outside the existence region"
    H = None
    res = abs(e(alpha))
    model_dict = None
    if rho > 0:
        model = KernelModel(Homogeneous(rho), corr, pattern.window, check=False)
        model_dict = model.to_dict()
        if config.compute_H:
            H = sensitivity_H(model, "simultaneous", tf, radial_order=config.radial_order).tolist()
    return FitResult([rho, alpha], names, status, res, it, _range(tf, corr), H,
                     model=model_dict, elapsed=time.perf_counter() - t0, message=msg, **base)


def fit(pattern: PointPattern, tf: TestFunction | str, config: FitConfig | None = None) -> FitResult:
    config = config or FitConfig()
    if config.layout == "simultaneous":
        return fit_simultaneous(pattern, tf, config)
    return fit_two_step(pattern, tf, config)


def _names(config: FitConfig) -> list[str]:
    if config.intensity == "homogeneous":
        return ["rho", "alpha"]
    return [f"beta_{c}" for c in config.covariates] + ["alpha"]


__all__ = [
    "AdaptiveCL",
    "FitConfig",
    "FitResult",
    "STATUSES",
    "alpha_upper",
    "fit",
    "fit_intensity",
    "fit_simultaneous",
    "fit_two_step",
    "select_root",
]
