"""Estimating functions: Poisson score, second-order equations and sensitivity matrices.

Integrals over W x W of functions of the form F(v - u) rho(u) rho(v) are
reduced with the substitution t = v - u to a radial integral

    int_0^R F(r) r Gamma(r) dr,   Gamma(r) = int_0^{2 pi} gamma_rho(r e_th) d th,

where gamma_rho(t) = int_{W cap (W - t)} rho(u) rho(u + t) du is a weighted set
covariance. Gamma depends on the intensity parameters only, so the cost of an
equation evaluation during the correlation-parameter search is one radial rule.
"""

from __future__ import annotations

import math

import numpy as np

from ..kernels import (
    FAMILIES,
    Homogeneous,
    IntensityModel,
    KernelModel,
    LogLinear,
    PointPattern,
    pair_corr_and_grad,
)
from ..numerics import (
    QuadratureRule,
    Window,
    composite_gauss_legendre,
    disc_quadrature,
    distance_density,
    gauss_legendre,
    gauss_legendre_2d,
)
from ..pairs import close_pairs
from .testfunctions import AdaptiveCL, DegeneratePair, TestFunction, radial_breaks

LAYOUTS = ("two-step", "simultaneous")


# ---------------------------------------------------------------------------
# Pairs


class PairCache:
    """Close pairs of a pattern, searched once at the largest radius requested."""

    def __init__(self, pattern: PointPattern):
        self.pattern = pattern
        self._radius = -1.0
        self._i = self._j = np.empty(0, dtype=np.intp)
        self._d = np.empty(0)

    def pairs(self, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if radius > self._radius:
            self._i, self._j, self._d = close_pairs(self.pattern.points, radius)
            self._radius = radius
        keep = self._d <= radius
        return self._i[keep], self._j[keep], self._d[keep]


def _pair_terms(r: np.ndarray, model: KernelModel, tf: TestFunction) -> tuple[np.ndarray, np.ndarray]:
    """Weights W(r) and W(r) * (dg/dalpha) / g at pair distances."""
    corr = model.correlation
    W = tf.weight(r, corr)
    live = W > 0
    g, dg = pair_corr_and_grad(corr, r[live])
    if np.any(g <= 0):
        raise DegeneratePair("rho2 <= 0 for a pair inside the support")
    fpsi = np.zeros_like(r)
    fpsi[live] = W[live] * dg / g
    return W, fpsi


def pair_sum(pattern: PointPattern, model: KernelModel, tf: TestFunction, layout: str = "two-step",
             cache: PairCache | None = None) -> np.ndarray:
    """Sum of f(u, v) over ordered pairs of distinct points."""
    cache = cache or PairCache(pattern)
    i, j, r = cache.pairs(tf.radius(model.correlation))
    W, fpsi = _pair_terms(r, model, tf)
    psi = 2.0 * fpsi.sum()
    if layout == "two-step":
        return np.array([psi])
    pts = pattern.points
    s = model.intensity.log_grad(pts[i]) + model.intensity.log_grad(pts[j]) if len(i) else np.zeros((0, 1))
    beta = 2.0 * (W[:, None] * s).sum(axis=0) if len(i) else np.zeros(model.intensity.params.size)
    return np.append(beta, psi)


# ---------------------------------------------------------------------------
# Translated intensity products


class PairIntegral:
    """Angular profiles of the weighted set covariance of an intensity on a window.

    ``profiles(r, intensity, score_intensity)`` returns, at each radius r,

        G0 = int dth int rho(u) rho(u+t) du
        G1 = int dth int (s(u) + s(u+t)) rho(u) rho(u+t) du
        G2 = int dth int (s + s')(s + s')^T rho(u) rho(u+t) du

    with t = r (cos th, sin th) and s = grad_beta log rho taken from
    ``score_intensity`` (defaults to ``intensity``).
    """

    def __init__(self, window: Window, angular_order: int = 8, rect_order: int = 10, table_degree: int = 20):
        self.window = window
        self.angular_order = angular_order
        self.rect_order = rect_order
        self.table_degree = table_degree
        # profiles are piecewise smooth in r with kinks at the window sides
        side = min(window.width, window.height)
        pts = set(np.linspace(0.0, window.diameter, int(math.ceil(window.diameter / (side / 8))) + 1).tolist())
        for edge in (window.width, window.height):
            # geometric refinement past each side, where the profile has a square-root kink
            pts.update(x for x in edge + (window.diameter - edge) * 0.5 ** np.arange(0, 16) if x < window.diameter)
            pts.add(edge)
        self._panels = np.array(sorted(pts))
        self._tables: dict = {}

    def _angles(self, r: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        breaks = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, 2.0 * math.pi]
        if r is not None:
            a, b = self.window.width, self.window.height
            for side, base in ((a, 0.0), (b, 0.5 * math.pi)):
                if r > side:
                    c = math.acos(side / r) if base == 0.0 else math.asin(side / r)
                    for q in range(4):
                        breaks += [q * 0.5 * math.pi + c, q * 0.5 * math.pi + 0.5 * math.pi - c]
            breaks = sorted(set(x for x in breaks if 0 <= x <= 2 * math.pi))
        return composite_gauss_legendre(breaks, self.angular_order)

    def profiles(self, r, intensity: IntensityModel, score_intensity: IntensityModel | None = None,
                 need: int = 2) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        sint = score_intensity or intensity
        if isinstance(intensity, Homogeneous) and isinstance(sint, Homogeneous):
            return self.direct_profiles(r, intensity, sint, need)
        return self._interpolated(np.asarray(r, dtype=float), intensity, sint, need)

    def _interpolated(self, r, intensity, sint, need):
        """Chebyshev interpolation per r-panel, tabulated lazily per intensity pair."""
        table = self._tables.setdefault((intensity, sint, need), {})
        flat = r.ravel()
        k = np.clip(np.searchsorted(self._panels, flat, side="right") - 1, 0, len(self._panels) - 2)
        p = intensity.params.size
        out0 = np.zeros(flat.shape)
        out1 = np.zeros(flat.shape + (p,))
        out2 = np.zeros(flat.shape + (p, p))
        cheb = np.polynomial.chebyshev
        for j in np.unique(k):
            a, b = self._panels[j], self._panels[j + 1]
            if j not in table:
                x = np.cos(np.pi * (np.arange(self.table_degree + 1) + 0.5) / (self.table_degree + 1))
                vals = self.direct_profiles(a + 0.5 * (b - a) * (x + 1.0), intensity, sint, need)
                table[j] = [None if v is None else cheb.chebfit(x, v.reshape(len(x), -1), self.table_degree)
                            for v in vals]
            sel = k == j
            x = (2.0 * flat[sel] - a - b) / (b - a)
            out0[sel] = cheb.chebval(x, table[j][0][:, 0])
            if need >= 1:
                out1[sel] = cheb.chebval(x, table[j][1]).T.reshape(-1, p)
            if need >= 2:
                out2[sel] = cheb.chebval(x, table[j][2]).T.reshape(-1, p, p)
        shape = r.shape
        return (out0.reshape(shape), out1.reshape(shape + (p,)) if need >= 1 else None,
                out2.reshape(shape + (p, p)) if need >= 2 else None)

    def direct_profiles(self, r, intensity: IntensityModel, sint: IntensityModel, need: int = 2):
        r = np.asarray(r, dtype=float)
        p = intensity.params.size
        short = r <= min(self.window.width, self.window.height)
        G0 = np.zeros(r.shape)
        G1 = np.zeros(r.shape + (p,))
        G2 = np.zeros(r.shape + (p, p))
        if short.any():
            th, wt = self._angles()
            g = self._gamma(r[short][:, None], th[None, :], intensity, sint, need)
            G0[short] = g[0] @ wt
            if need >= 1:
                G1[short] = np.einsum("rtp,t->rp", g[1], wt)
            if need >= 2:
                G2[short] = np.einsum("rtpq,t->rpq", g[2], wt)
        for idx in np.nonzero(~short)[0]:
            th, wt = self._angles(float(r[idx]))
            g = self._gamma(np.array([[r[idx]]]), th[None, :], intensity, sint, need)
            G0[idx] = g[0][0] @ wt
            if need >= 1:
                G1[idx] = np.einsum("tp,t->p", g[1][0], wt)
            if need >= 2:
                G2[idx] = np.einsum("tpq,t->pq", g[2][0], wt)
        return G0, (G1 if need >= 1 else None), (G2 if need >= 2 else None)

    def _gamma(self, r, th, intensity, sint, need):
        w = self.window
        t1 = r * np.cos(th)
        t2 = r * np.sin(th)
        lx = np.maximum(w.width - np.abs(t1), 0.0)
        ly = np.maximum(w.height - np.abs(t2), 0.0)
        if isinstance(intensity, Homogeneous) and isinstance(sint, Homogeneous):
            area = lx * ly
            rho2 = intensity.rho**2
            s = 2.0 / sint.rho
            g0 = rho2 * area
            return g0, (g0 * s)[..., None], (g0 * s * s)[..., None, None]
        # Gauss-Legendre on the intersection rectangle W cap (W - t)
        q = self.rect_order
        xq, wq = np.polynomial.legendre.leggauss(q)
        ux0 = w.x0 + np.maximum(0.0, -t1)
        uy0 = w.y0 + np.maximum(0.0, -t2)
        ux = ux0[..., None] + 0.5 * lx[..., None] * (xq + 1.0)  # (..., q)
        uy = uy0[..., None] + 0.5 * ly[..., None] * (xq + 1.0)
        UX = np.broadcast_to(ux[..., :, None], ux.shape + (q,))
        UY = np.broadcast_to(uy[..., None, :], uy.shape[:-1] + (q, q))
        WW = 0.25 * (lx * ly)[..., None, None] * np.outer(wq, wq)
        u = np.stack([UX, UY], axis=-1)
        v = u + np.stack([t1, t2], axis=-1)[..., None, None, :]
        flat_u = u.reshape(-1, 2)
        flat_v = v.reshape(-1, 2)
        prod = (intensity(flat_u) * intensity(flat_v)).reshape(UX.shape) * WW
        g0 = prod.sum(axis=(-1, -2))
        if need == 0:
            return g0, None, None
        s = (sint.log_grad(flat_u) + sint.log_grad(flat_v)).reshape(UX.shape + (-1,))
        g1 = np.einsum("...ab,...abp->...p", prod, s)
        g2 = np.einsum("...ab,...abp,...abq->...pq", prod, s, s) if need >= 2 else None
        return g0, g1, g2


def _radial_rule(tf: TestFunction, model: KernelModel, window: Window, order: int = 16):
    breaks = radial_breaks(tf, model.correlation, extra=[window.width, window.height], panels_per_alpha=4.0)
    return composite_gauss_legendre(breaks, order)


def integral_term(model: KernelModel, tf: TestFunction, layout: str = "two-step",
                  integ: PairIntegral | None = None, model_rho: KernelModel | None = None,
                  radial_order: int = 16) -> np.ndarray:
    """int int f(u, v; theta_f) rho2(u, v; theta_rho) du dv over W x W.

    ``model`` supplies theta_f and ``model_rho`` (default: the same) theta_rho.
    """
    model_rho = model_rho or model
    integ = integ or PairIntegral(model.window)
    r, wr = _radial_rule(tf, model, integ.window, radial_order)
    W = tf.weight(r, model.correlation)
    live = W > 0
    r, wr, W = r[live], wr[live], W[live]
    g_f, dg_f = pair_corr_and_grad(model.correlation, r)
    if model_rho is model:
        g_rho = g_f
    else:
        g_rho, _ = pair_corr_and_grad(model_rho.correlation, r)
    need = 0 if layout == "two-step" else 1
    G0, G1, _ = integ.profiles(r, model_rho.intensity, model.intensity, need=need)
    base = wr * r * W
    psi = np.sum(base * dg_f / g_f * g_rho * G0)
    if layout == "two-step":
        return np.array([psi])
    beta = (base * g_rho) @ G1
    return np.append(beta, psi)


def second_order_equation(pattern: PointPattern, model: KernelModel, tf: TestFunction,
                          layout: str = "two-step", cache: PairCache | None = None,
                          integ: PairIntegral | None = None) -> np.ndarray:
    """sum_{u != v} f(u, v) - int int f rho2."""
    if pattern.window != model.window:
        raise ValueError("pattern and model windows differ")
    return pair_sum(pattern, model, tf, layout, cache) - integral_term(model, tf, layout, integ)


def integral_term_direct(model: KernelModel, tf: TestFunction, layout: str = "two-step",
                         outer_order: int = 24, radial_order: int = 24, angular_order: int = 24) -> np.ndarray:
    """Reference route: outer Gauss-Legendre over u, inner clipped disc rule over v.

    Slow; used as an independent check of :func:`integral_term`.
    """
    window = model.window
    outer = gauss_legendre_2d(window, outer_order)
    R = tf.radius(model.correlation)
    total = None
    for u, wu in zip(outer.nodes, outer.weights):
        inner = disc_quadrature(u, R, window, radial_order, angular_order)
        v = inner.nodes
        d = np.hypot(*(v - u).T)
        keep = d > 0
        v, d, wv = v[keep], d[keep], inner.weights[keep]
        W = tf.weight(d, model.correlation)
        g, dg = pair_corr_and_grad(model.correlation, d)
        rho_u = model.intensity(u[None, :])[0]
        rho_v = model.intensity(v)
        base = wu * wv * W * rho_u * rho_v
        psi = np.sum(base * dg)
        if layout == "two-step":
            val = np.array([psi])
        else:
            s = model.intensity.log_grad(u[None, :]) + model.intensity.log_grad(v)
            val = np.append((base * g) @ s, psi)
        total = val if total is None else total + val
    return total


# ---------------------------------------------------------------------------
# First-order block


def poisson_score(pattern: PointPattern, intensity: IntensityModel, quad: QuadratureRule | None = None) -> np.ndarray:
    """sum_u grad rho/rho - int_W grad rho."""
    window = pattern.window
    if isinstance(intensity, Homogeneous):
        return np.array([pattern.n / intensity.rho - window.area])
    quad = quad or gauss_legendre_2d(window, 24)
    pts = pattern.points
    data = intensity.log_grad(pts).sum(axis=0) if pattern.n else np.zeros(intensity.params.size)
    integral = (quad.weights * intensity(quad.nodes)) @ intensity.log_grad(quad.nodes)
    return data - integral


def poisson_jacobian(pattern: PointPattern, intensity: IntensityModel, quad: QuadratureRule | None = None) -> np.ndarray:
    window = pattern.window
    if isinstance(intensity, Homogeneous):
        return np.array([[-pattern.n / intensity.rho**2]])
    quad = quad or gauss_legendre_2d(window, 24)
    z = intensity.log_grad(quad.nodes)
    return -np.einsum("n,np,nq->pq", quad.weights * intensity(quad.nodes), z, z)


def estimating_function(pattern: PointPattern, model: KernelModel, tf: TestFunction,
                        layout: str = "two-step", cache: PairCache | None = None,
                        integ: PairIntegral | None = None, quad: QuadratureRule | None = None) -> np.ndarray:
    """Full e_n(theta): (s_n, u_n) for two-step, the theta-gradient equation otherwise."""
    if layout == "two-step":
        return np.append(poisson_score(pattern, model.intensity, quad),
                         second_order_equation(pattern, model, tf, layout, cache, integ))
    return second_order_equation(pattern, model, tf, layout, cache, integ)


# ---------------------------------------------------------------------------
# Stationary forms written with the distance distribution


def _distance_rule(tf: TestFunction, model: KernelModel, window: Window, order: int = 16):
    r, wr = _radial_rule(tf, model, window, order)
    return r, wr * distance_density(window, r)


def _stationary_parts(pattern: PointPattern, alpha: float, tf: TestFunction, family: str,
                      cache: PairCache | None = None):
    corr = FAMILIES[family](alpha)
    model = KernelModel(Homogeneous(1.0), corr, pattern.window, check=False)
    _, _, d = (cache or PairCache(pattern)).pairs(tf.radius(corr))
    W, fpsi = _pair_terms(d, model, tf)
    r, wF = _distance_rule(tf, model, pattern.window)
    Wr = tf.weight(r, corr)
    g, dg = pair_corr_and_grad(corr, r)
    S0 = 2.0 * W.sum()
    S1 = 2.0 * fpsi.sum()
    I0 = np.sum(wF * Wr * g)
    I1 = np.sum(wF * Wr * dg)
    return S0, S1, I0, I1


def stationary_equation_e2(pattern: PointPattern, alpha: float, rho_hat: float | None = None,
                           epsilon: float = 0.01, family: str = "bessel",
                           tf: TestFunction | None = None, cache: PairCache | None = None) -> np.ndarray:
    """Two-step equation for alpha in pairwise-distance form.

    sum over ordered pairwise distances of w(eps/C^2) g'/g minus
    (rho_hat |W|)^2 int w(eps/C^2) g' dF, with F the distance CDF of the window.
    With the default rho_hat = N/|W| the factor is N^2.
    """
    tf = tf or AdaptiveCL(epsilon)
    n_eff = pattern.n if rho_hat is None else rho_hat * pattern.window.area
    _, S1, _, I1 = _stationary_parts(pattern, alpha, tf, family, cache)
    return np.array([S1 - n_eff**2 * I1])


def simultaneous_equation(pattern: PointPattern, alpha: float, epsilon: float = 0.01,
                          family: str = "bessel", tf: TestFunction | None = None,
                          cache: PairCache | None = None) -> np.ndarray:
    """Profile equation for alpha after eliminating rho from the simultaneous system.

    Returns ``S1 - (S0 / I0) I1`` where S0, S1 are ordered-pair sums of w and
    w g'/g, and I0, I1 the distance-distribution integrals of w g and w g'.
    """
    tf = tf or AdaptiveCL(epsilon)
    S0, S1, I0, I1 = _stationary_parts(pattern, alpha, tf, family, cache)
    if S0 == 0:
        return np.array([0.0])
    return np.array([S1 - S0 / I0 * I1])


def simultaneous_rho(pattern: PointPattern, alpha: float, epsilon: float = 0.01,
                     family: str = "bessel", tf: TestFunction | None = None,
                     cache: PairCache | None = None) -> float:
    """rho_hat^2 = |W|^-2 S0 / I0."""
    tf = tf or AdaptiveCL(epsilon)
    S0, _, I0, _ = _stationary_parts(pattern, alpha, tf, family, cache)
    return math.sqrt(max(S0, 0.0) / I0) / pattern.window.area


# ---------------------------------------------------------------------------
# Sensitivity


def sensitivity_H(model: KernelModel, layout: str, tf: TestFunction, integ: PairIntegral | None = None,
                  quad: QuadratureRule | None = None, radial_order: int = 16) -> np.ndarray:
    """H_n(theta) = |W|^-1 int f grad(rho^(q))^T, stacked by block.

    two-step: [[H11, 0], [H21, H22]] with H11 = |W|^-1 int grad rho grad rho^T / rho.
    simultaneous: the (p+1) x (p+1) matrix of the single second-order block.
    """
    window = model.window
    integ = integ or PairIntegral(window)
    area = window.area
    intensity = model.intensity
    p = intensity.params.size
    r, wr = _radial_rule(tf, model, window, radial_order)
    W = tf.weight(r, model.correlation)
    live = W > 0
    r, wr, W = r[live], wr[live], W[live]
    g, dg = pair_corr_and_grad(model.correlation, r)
    G0, G1, G2 = integ.profiles(r, intensity, need=2)
    base = wr * r * W
    H21 = (base * dg) @ G1 / area
    H22 = np.sum(base * dg * dg / g * G0) / area
    H = np.zeros((p + 1, p + 1))
    if layout == "two-step":
        if isinstance(intensity, Homogeneous):
            H[:p, :p] = 1.0 / intensity.rho
        else:
            quad = quad or gauss_legendre_2d(window, 24)
            z = intensity.log_grad(quad.nodes)
            H[:p, :p] = np.einsum("n,np,nq->pq", quad.weights * intensity(quad.nodes), z, z) / area
    elif layout == "simultaneous":
        H[:p, :p] = np.einsum("r,rpq->pq", base * g, G2) / area
        H[:p, p] = H21
    else:
        raise ValueError(f"unknown layout {layout!r}")
    H[p, :p] = H21
    H[p, p] = H22
    return H


def h_limit(model: KernelModel, tf: TestFunction, layout: str = "two-step", radial_order: int = 16) -> np.ndarray:
    """Large-window limit of H_n for a stationary model.

    H11 -> 1/rho, H21 -> 2 rho int w g' dt, H22 -> rho^2 int w g'^2 / g dt,
    integrals over the plane by radial quadrature.
    """
    if not isinstance(model.intensity, Homogeneous):
        raise ValueError("the limit is defined for stationary models")
    rho = model.intensity.rho
    breaks = radial_breaks(tf, model.correlation)
    r, wr = composite_gauss_legendre(breaks, radial_order)
    W = tf.weight(r, model.correlation)
    g, dg = pair_corr_and_grad(model.correlation, r)
    live = W > 0
    ring = 2.0 * math.pi * r * wr * W
    h21 = 2.0 * rho * np.sum(ring * dg)
    h22 = rho**2 * np.sum(np.where(live, ring * dg * dg / np.where(live, g, 1.0), 0.0))
    if layout == "two-step":
        return np.array([[1.0 / rho, 0.0], [h21, h22]])
    h11 = 4.0 * np.sum(ring * g)
    return np.array([[h11, h21], [h21, h22]])
