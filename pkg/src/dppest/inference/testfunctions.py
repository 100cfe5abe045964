"""Pair weights for second-order composite likelihood: fixed radius and adaptive."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..kernels import CorrelationModel, KernelModel, pair_corr_and_grad, support_intervals


class DegeneratePair(ArithmeticError):
    """A pair inside the support has rho2 <= 0 (alpha at the existence boundary)."""


def weight_w(r):
    """exp(1 / (r^2 - 1)) on (-1, 1), zero elsewhere; C-infinity at +-1."""
    r = np.asarray(r, dtype=float)
    inside = np.abs(r) < 1.0
    rr = np.where(inside, r, 0.0)
    out = np.where(inside, np.exp(1.0 / (rr * rr - 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TruncatedCL:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def label(self) -> str:
        return f"truncated:R={self.R:g}"

    def weight(self, r, corr: CorrelationModel) -> np.ndarray:
        return (np.asarray(r, dtype=float) <= self.R).astype(float)

    def support(self, corr: CorrelationModel) -> list[tuple[float, float]]:
        return [(0.0, self.R)]

    def radius(self, corr: CorrelationModel) -> float:
        return self.R


@dataclass(frozen=True)
class AdaptiveCL:
    """Weight w(eps / C(r)^2): pairs count only where C^2 exceeds eps."""

    epsilon: float = 0.01

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def label(self) -> str:
        return f"adaptive:eps={self.epsilon:g}"

    def weight(self, r, corr: CorrelationModel) -> np.ndarray:
        c2 = corr.C(r) ** 2
        with np.errstate(divide="ignore"):
            arg = np.where(c2 > self.epsilon, self.epsilon / np.maximum(c2, 1e-300), 2.0)
        return weight_w(arg)

    def support(self, corr: CorrelationModel) -> list[tuple[float, float]]:
        return support_intervals(corr, self.epsilon)

    def radius(self, corr: CorrelationModel) -> float:
        return self.support(corr)[-1][1]


TestFunction = TruncatedCL | AdaptiveCL


def parse_method(spec: str) -> TestFunction:
    """``truncated:R=0.1`` or ``adaptive:eps=0.01``."""
    kind, _, rest = spec.partition(":")
    args = dict(kv.split("=", 1) for kv in rest.split(",") if kv)
    kind = kind.strip().lower()
    if kind == "truncated":
        return TruncatedCL(float(args["R"]))
    if kind == "adaptive":
        return AdaptiveCL(float(args.get("eps", 0.01)))
    raise ValueError(f"unknown method {spec!r}")


def _pair_f(u, v, model: KernelModel, tf: TestFunction, layout: str) -> np.ndarray:
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    r = np.sqrt(np.sum((u - v) ** 2, axis=-1))
    if np.any(r == 0):
        raise ValueError("f is defined for distinct points only")
    corr = model.correlation
    W = tf.weight(r, corr)
    g, dg = pair_corr_and_grad(corr, r)
    live = W > 0
    if np.any(g[live] <= 0):
        raise DegeneratePair("rho2 <= 0 for a pair inside the support")
    fpsi = np.where(live, W * dg / np.where(live, g, 1.0), 0.0)
    if layout == "two-step":
        out = fpsi[:, None]
    elif layout == "simultaneous":
        s = model.intensity.log_grad(u) + model.intensity.log_grad(v)
        out = np.column_stack([W[:, None] * s, fpsi])
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return out[0] if out.shape[0] == 1 else out


def f_truncated(u, v, model: KernelModel, R: float, layout: str = "two-step") -> np.ndarray:
    """1{|u-v| <= R} grad rho2 / rho2 (alpha block only in the two-step layout)."""
    return _pair_f(u, v, model, TruncatedCL(R), layout)


def f_adaptive(u, v, model: KernelModel, epsilon: float = 0.01, layout: str = "two-step") -> np.ndarray:
    """w(eps / C(u-v)^2) grad rho2 / rho2; for separable kernels g(u,u) - 1 = -1, g - 1 = -C^2."""
    return _pair_f(u, v, model, AdaptiveCL(epsilon), layout)


def radial_breaks(tf: TestFunction, corr: CorrelationModel, extra: list[float] = (),
                  panels_per_alpha: float = 1.0) -> list[float]:
    """Breakpoints for composite radial quadrature over the support of ``tf``.

    Bessel-type correlations oscillate with period pi*alpha in r, so panels are
    at most alpha wide near the origin and widen to 4 alpha beyond 50 alpha
    where the integrands have decayed like r^-3.
    """
    a = corr.alpha / panels_per_alpha
    pts: set[float] = set()
    for lo, hi in tf.support(corr):
        pts.update((lo, hi))
        near = min(hi, 50 * corr.alpha)
        if near > lo:
            n = max(1, math.ceil((near - lo) / a))
            pts.update(np.linspace(lo, near, n + 1).tolist())
        if hi > near:
            n = max(1, math.ceil((hi - near) / (4 * a)))
            pts.update(np.linspace(near, hi, n + 1).tolist())
    hi_all = max(pts)
    pts.update(x for x in extra if 0 < x < hi_all)
    return sorted(pts)
