"""Parametric DPP kernels K(u, v) = sqrt(rho(u) rho(v)) C(u - v; alpha)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import ClassVar, Sequence

import numpy as np

from .numerics import NoBracket, Window, bessel_j, brent_root


class ExistenceViolation(ValueError):
    pass


class DuplicatePoints(ValueError):
    pass


class NoSolution(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Intensity models

_COVARIATES = {
    "1": lambda p: np.ones(len(p)),
    "x": lambda p: p[:, 0],
    "y": lambda p: p[:, 1],
}


@dataclass(frozen=True)
class Homogeneous:
    """Constant intensity, parametrised directly by ``rho``."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.rho])

    def with_params(self, params) -> "Homogeneous":
        return Homogeneous(float(np.asarray(params).ravel()[0]))

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.full(len(pts), self.rho)

    def log_grad(self, pts) -> np.ndarray:
        """grad_beta log rho(u), shape (n, p)."""
        pts = np.atleast_2d(pts)
        return np.full((len(pts), 1), 1.0 / self.rho)

    def sup(self, window: Window) -> float:
        return self.rho

    def to_dict(self) -> dict:
        return {"type": "homogeneous", "rho": self.rho}


@dataclass(frozen=True)
class LogLinear:
    """rho(u) = exp(beta . z(u)) with covariates drawn from ``1``, ``x``, ``y``."""

    beta: tuple[float, ...]
    covariates: tuple[str, ...] = ("1", "x")

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if len(self.beta) != len(self.covariates):
            raise ValueError("beta and covariates must have the same length")
        unknown = set(self.covariates) - set(_COVARIATES)
        if unknown:
            raise ValueError(f"unknown covariates {sorted(unknown)}")

    @property
    def params(self) -> np.ndarray:
        return np.array(self.beta)

    def with_params(self, params) -> "LogLinear":
        return replace(self, beta=tuple(np.asarray(params, dtype=float).ravel()))

    def z(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.column_stack([_COVARIATES[c](pts) for c in self.covariates])

    def __call__(self, pts) -> np.ndarray:
        return np.exp(self.z(pts) @ self.params)

    def log_grad(self, pts) -> np.ndarray:
        return self.z(pts)

    def sup(self, window: Window) -> float:
        # linear exponent on a rectangle: maximum sits at a corner
        return float(self(window.corners).max())

    def to_dict(self) -> dict:
        return {"type": "loglinear", "beta": list(self.beta), "covariates": list(self.covariates)}


IntensityModel = Homogeneous | LogLinear


def intensity_from_dict(d: dict) -> IntensityModel:
    kind = d.get("type", "homogeneous")
    if kind == "homogeneous":
        return Homogeneous(float(d["rho"]))
    if kind == "loglinear":
        return LogLinear(tuple(d["beta"]), tuple(d.get("covariates", ("1", "x"))))
    raise ValueError(f"unknown intensity type {kind!r}")


# ---------------------------------------------------------------------------
# Correlation families. C(r; alpha) = unit(r / alpha) for both families.


@dataclass(frozen=True)
class BesselType:
    """C(r) = J1(2r/alpha) / (r/alpha); spectral density pi alpha^2 on |xi| <= 1/(pi alpha)."""

    alpha: float
    name: ClassVar[str] = "bessel"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def with_alpha(self, alpha: float) -> "BesselType":
        return BesselType(alpha)

    @staticmethod
    def unit(x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = 2.0 * np.abs(x)
        small = z < 1e-8
        zs = np.where(small, 1.0, z)
        return np.where(small, 1.0 - z * z / 8.0, 2.0 * bessel_j(1, zs) / zs)

    def C(self, r) -> np.ndarray:
        return self.unit(np.asarray(r, dtype=float) / self.alpha)

    def one_minus_C(self, r) -> np.ndarray:
        z = 2.0 * np.abs(np.asarray(r, dtype=float)) / self.alpha
        small = z < 0.5
        out = np.where(small, 0.0, 1.0 - self.unit(0.5 * np.where(small, 1.0, z)))
        if small.any():
            # 1 - 2 J1(z)/z = sum_{k>=1} (-1)^(k+1) (z/2)^(2k) / (k! (k+1)!)
            h2 = (0.5 * z[small]) ** 2
            term = h2 / 2.0
            acc = term.copy()
            for k in range(2, 10):
                term = -term * h2 / (k * (k + 1))
                acc += term
            out[small] = acc
        return out

    def dC(self, r) -> np.ndarray:
        """dC/dalpha = 2 J2(2r/alpha) / alpha."""
        z = 2.0 * np.abs(np.asarray(r, dtype=float)) / self.alpha
        return 2.0 * bessel_j(2, z) / self.alpha

    def C_and_dC(self, r) -> tuple[np.ndarray, np.ndarray]:
        return self.C(r), self.dC(r)

    def spectral_density(self, xi_norm) -> np.ndarray:
        xi_norm = np.asarray(xi_norm, dtype=float)
        return np.where(xi_norm <= 1.0 / (math.pi * self.alpha), math.pi * self.alpha**2, 0.0)

    @property
    def spectral_sup(self) -> float:
        return math.pi * self.alpha**2

    @property
    def spectral_radius(self) -> float:
        return 1.0 / (math.pi * self.alpha)

    def max_alpha(self, rho_max: float) -> float:
        return 1.0 / math.sqrt(math.pi * rho_max)

    def to_dict(self) -> dict:
        return {"family": self.name, "alpha": self.alpha}


@dataclass(frozen=True)
class Gaussian:
    """C(r) = exp(-(r/alpha)^2); spectral density pi alpha^2 exp(-(pi alpha |xi|)^2)."""

    alpha: float
    name: ClassVar[str] = "gauss"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def with_alpha(self, alpha: float) -> "Gaussian":
        return Gaussian(alpha)

    @staticmethod
    def unit(x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(-x * x)

    def C(self, r) -> np.ndarray:
        return self.unit(np.asarray(r, dtype=float) / self.alpha)

    def one_minus_C(self, r) -> np.ndarray:
        x = np.asarray(r, dtype=float) / self.alpha
        return -np.expm1(-x * x)

    def dC(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.C(r) * 2.0 * r * r / self.alpha**3

    def C_and_dC(self, r) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        c = self.C(r)
        return c, c * 2.0 * r * r / self.alpha**3

    def spectral_density(self, xi_norm) -> np.ndarray:
        xi_norm = np.asarray(xi_norm, dtype=float)
        return math.pi * self.alpha**2 * np.exp(-((math.pi * self.alpha * xi_norm) ** 2))

    @property
    def spectral_sup(self) -> float:
        return math.pi * self.alpha**2

    @property
    def spectral_radius(self) -> float:
        # phi/phi(0) < 1e-18 beyond this frequency
        return math.sqrt(18 * math.log(10)) / (math.pi * self.alpha)

    def max_alpha(self, rho_max: float) -> float:
        return 1.0 / math.sqrt(math.pi * rho_max)

    def to_dict(self) -> dict:
        return {"family": self.name, "alpha": self.alpha}


CorrelationModel = BesselType | Gaussian
FAMILIES = {"bessel": BesselType, "gauss": Gaussian, "gaussian": Gaussian}


def correlation_from_dict(d: dict) -> CorrelationModel:
    return FAMILIES[d.get("family", "bessel")](float(d["alpha"]))


def pair_corr_and_grad(corr: CorrelationModel, r) -> tuple[np.ndarray, np.ndarray]:
    """g(r) = 1 - C^2 and dg/dalpha = -2 C dC/dalpha."""
    c, dc = corr.C_and_dC(r)
    return corr.one_minus_C(r) * (1.0 + c), -2.0 * c * dc


# ---------------------------------------------------------------------------
# Kernel model


@dataclass(frozen=True)
class KernelModel:
    intensity: IntensityModel
    correlation: CorrelationModel
    window: Window = field(default_factory=Window.unit)
    check: bool = True

    def __post_init__(self):
        if self.check:
            m = existence_check(self)
            if m > 1.0:
                raise ExistenceViolation(f"existence margin {m:.4f} > 1")

    @property
    def alpha(self) -> float:
        return self.correlation.alpha

    @property
    def theta(self) -> np.ndarray:
        """(beta, alpha)."""
        return np.append(self.intensity.params, self.alpha)

    def with_theta(self, theta, check: bool = False) -> "KernelModel":
        theta = np.asarray(theta, dtype=float)
        return KernelModel(
            self.intensity.with_params(theta[:-1]),
            self.correlation.with_alpha(float(theta[-1])),
            self.window,
            check,
        )

    def to_dict(self) -> dict:
        return {
            "intensity": self.intensity.to_dict(),
            "correlation": self.correlation.to_dict(),
            "window": self.window.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict, check: bool = True) -> "KernelModel":
        win = Window(*d["window"]) if "window" in d else Window.unit()
        return cls(intensity_from_dict(d["intensity"]), correlation_from_dict(d["correlation"]), win, check)


@dataclass(frozen=True)
class PointPattern:
    points: np.ndarray
    window: Window

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if len(pts) and not self.window.contains(pts).all():
            raise ValueError("points outside the window")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise DuplicatePoints("duplicate coordinates in pattern")

    def __len__(self):
        return len(self.points)

    @property
    def n(self) -> int:
        return len(self.points)


def _dist(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum((u - v) ** 2, axis=-1))


def kernel_eval(model: KernelModel, u, v):
    """K(u, v); K(u, u) = rho(u)."""
    u2 = np.atleast_2d(u)
    v2 = np.atleast_2d(v)
    val = np.sqrt(model.intensity(u2) * model.intensity(v2)) * model.correlation.C(_dist(u2, v2))
    return float(val[0]) if np.ndim(u) == 1 and np.ndim(v) == 1 else val


def kernel_matrix(model: KernelModel, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    s = np.sqrt(model.intensity(pts))
    d = _dist(pts[:, None, :], pts[None, :, :])
    return s[:, None] * model.correlation.C(d) * s[None, :]


def joint_intensity(model: KernelModel, points) -> float:
    """rho^(n)(u_1..u_n) = det[K(u_i, u_j)]."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(np.unique(pts, axis=0)) != len(pts):
        raise DuplicatePoints("joint intensity needs pairwise distinct points")
    K = kernel_matrix(model, pts)
    det = float(np.linalg.det(K))  # LU with partial pivoting
    scale = float(np.prod(np.diag(K)))
    if det < 0:
        if det < -1e-10 * scale:
            raise ArithmeticError(f"negative determinant {det:g} for a PSD kernel matrix")
        det = 0.0
    return det


def pair_correlation(model: KernelModel, u, v):
    """g(u, v) = 1 - C(u - v)^2; independent of the intensity."""
    c = model.correlation.C(_dist(np.atleast_2d(u), np.atleast_2d(v)))
    g = 1.0 - c * c
    return float(g[0]) if np.ndim(u) == 1 and np.ndim(v) == 1 else g


def existence_check(model: KernelModel) -> float:
    """Existence margin sup(rho) * sup(phi); the DPP exists when it is <= 1."""
    return model.intensity.sup(model.window) * model.correlation.spectral_sup


# ---------------------------------------------------------------------------
# Practical range


@lru_cache(maxsize=64)
def _unit_support(family: str, epsilon: float) -> tuple[tuple[float, float], ...]:
    """Intervals of x = r/alpha where unit(x)^2 > epsilon, in units of alpha."""
    unit = FAMILIES[family].unit
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    # both families are bounded by 2 x^-1.5 / sqrt(pi) for x >= 1
    x_max = max(4.0, (2.0 / math.sqrt(math.pi * epsilon)) ** (2.0 / 3.0) * 1.05)
    grid = np.linspace(0.0, x_max, int(x_max * 400) + 2)
    h = unit(grid) ** 2 - epsilon
    if h[-1] > 0:
        raise NoSolution("upper bound too small")  # cannot happen for implemented families
    pos = h > 0
    edges = np.nonzero(pos[1:] != pos[:-1])[0]
    fn = lambda x: float(unit(x) ** 2 - epsilon)  # noqa: E731
    crossings = [brent_root(fn, grid[i], grid[i + 1], tol=1e-15) for i in edges]
    # pos[0] is True (C(0) = 1), so crossings alternate exit/entry
    starts = [0.0] + crossings[1::2]
    stops = crossings[0::2]
    return tuple(zip(starts, stops))


def support_intervals(corr: CorrelationModel, epsilon: float) -> list[tuple[float, float]]:
    """Distance intervals where C(r)^2 > epsilon."""
    return [(a * corr.alpha, b * corr.alpha) for a, b in _unit_support(corr.name, float(epsilon))]


def adaptive_range(model: KernelModel | CorrelationModel, epsilon: float = 0.01) -> float:
    """Largest r with C(r)^2 = epsilon, i.e. the outermost solution of |g(r) - 1| = epsilon."""
    corr = model.correlation if isinstance(model, KernelModel) else model
    try:
        return support_intervals(corr, epsilon)[-1][1]
    except NoBracket as exc:  # pragma: no cover
        raise NoSolution(str(exc)) from exc


def model_from_spec(intensity: dict, correlation: dict, window: Sequence[float] | None = None) -> KernelModel:
    win = Window(*window) if window is not None else Window.unit()
    return KernelModel(intensity_from_dict(intensity), correlation_from_dict(correlation), win)
