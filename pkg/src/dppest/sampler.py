"""Spectral simulation of DPPs on rectangles, plus Poisson samplers.

The stationary envelope kernel sup(rho) * C is approximated on a torus that
contains the observation window with a margin, its Fourier eigenfunctions are
selected independently with probability equal to their eigenvalue, the
resulting projection DPP is sampled point by point, and the pattern is cropped
and thinned to the target intensity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import (
    BesselType,
    ExistenceViolation,
    IntensityModel,
    KernelModel,
    PointPattern,
    adaptive_range,
    existence_check,
)
from .numerics import SeedSpec, Window


class SamplerStall(RuntimeError):
    pass


MAX_PROPOSALS = 10**6
ENLARGE_EPSILON = 1e-4


@dataclass(frozen=True)
class SpectralApproximation:
    """Eigen-decomposition of the envelope kernel on an L1 x L2 torus.

    ``freqs`` holds the zero frequency (if present) followed by one
    representative of each pair {k, -k}; every nonzero representative carries
    a cosine and a sine eigenfunction sharing the eigenvalue.
    """

    freqs: np.ndarray  # (K, 2) integer lattice points
    eigenvalues: np.ndarray  # (K,)
    periods: tuple[float, float]
    origin: tuple[float, float]

    @property
    def area(self) -> float:
        return self.periods[0] * self.periods[1]

    @property
    def torus(self) -> Window:
        x0, y0 = self.origin
        return Window(x0, x0 + self.periods[0], y0, y0 + self.periods[1])

    def expected_count(self) -> float:
        mult = np.where(np.all(self.freqs == 0, axis=1), 1.0, 2.0)
        return float(np.dot(mult, self.eigenvalues))


def _half_plane(freqs: np.ndarray) -> np.ndarray:
    k1, k2 = freqs[:, 0], freqs[:, 1]
    return (k1 > 0) | ((k1 == 0) & (k2 >= 0))


def _lattice(radius1: float, radius2: float) -> np.ndarray:
    n1, n2 = int(math.ceil(radius1)), int(math.ceil(radius2))
    k1, k2 = np.meshgrid(np.arange(-n1, n1 + 1), np.arange(-n2, n2 + 1), indexing="ij")
    freqs = np.column_stack([k1.ravel(), k2.ravel()])
    return freqs[_half_plane(freqs)]


def _exact_scale(base: tuple[float, float], alpha: float) -> float:
    """Torus scale s >= 1 at which the disc-indicator spectrum has mass exactly sup(rho) * area.

    With sides s*L, the eigenvalues are all pi alpha^2 sup(rho) on the lattice
    points inside the spectral disc, so the intensity is exact iff the lattice
    count equals s^2 L1 L2 / (pi alpha^2).
    """
    a = 1.0 / (math.pi * alpha)
    L1, L2 = base
    c = L1 * L2 / (math.pi * alpha**2)
    smax = 1.5
    n1, n2 = int(math.ceil(a * L1 * smax)), int(math.ceil(a * L2 * smax))
    k1, k2 = np.meshgrid(np.arange(-n1, n1 + 1), np.arange(-n2, n2 + 1), indexing="ij")
    sk = np.sqrt((k1 / L1) ** 2 + (k2 / L2) ** 2).ravel() / a
    sk = np.sort(sk[sk <= smax])
    levels, counts = np.unique(sk, return_counts=True)
    cum = np.cumsum(counts)
    for j in range(len(levels) - 1):
        s = math.sqrt(cum[j] / c)
        if s >= 1.0 and levels[j] <= s < levels[j + 1]:
            return s
    raise RuntimeError("no exact-intensity torus scale found")  # pragma: no cover


def spectral_approximation(model: KernelModel, window: Window | None = None) -> SpectralApproximation:
    window = window or model.window
    corr = model.correlation
    rho_max = model.intensity.sup(window)
    margin = adaptive_range(corr, ENLARGE_EPSILON)
    base = (window.width + 2 * margin, window.height + 2 * margin)
    scale = _exact_scale(base, corr.alpha) if isinstance(corr, BesselType) else 1.0
    L1, L2 = base[0] * scale, base[1] * scale
    R = corr.spectral_radius
    freqs = _lattice(R * L1, R * L2)
    xi = np.hypot(freqs[:, 0] / L1, freqs[:, 1] / L2)
    lam = rho_max * corr.spectral_density(xi)
    keep = lam > 0
    freqs, lam = freqs[keep], lam[keep]
    origin = (window.x0 - 0.5 * (L1 - window.width), window.y0 - 0.5 * (L2 - window.height))
    return SpectralApproximation(freqs, lam, (L1, L2), origin)


class _Features:
    """Real orthonormal eigenfunctions on the torus, evaluated at batches of points."""

    def __init__(self, spec: SpectralApproximation, const: bool, cos_freqs: np.ndarray, sin_freqs: np.ndarray):
        self.area = spec.area
        self.origin = np.asarray(spec.origin)
        self.periods = np.asarray(spec.periods)
        self.const = const
        self.cos_freqs = np.asarray(cos_freqs, dtype=np.int64).reshape(-1, 2)
        self.sin_freqs = np.asarray(sin_freqs, dtype=np.int64).reshape(-1, 2)
        allf = np.vstack([self.cos_freqs, self.sin_freqs, np.zeros((1, 2), dtype=np.int64)])
        self.n1 = int(allf[:, 0].max())
        self.n2 = int(np.abs(allf[:, 1]).max())
        self.m = int(const) + len(self.cos_freqs) + len(self.sin_freqs)
        # sup over x of sum_j phi_j(x)^2
        self.bound = (int(const) + 2 * (len(self.cos_freqs) + len(self.sin_freqs))) / self.area

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = x - self.origin
        # exp(i w.x) factorises over the two axes; half-plane frequencies have k1 >= 0
        e1 = np.exp(np.outer(x[:, 0], 2j * math.pi * np.arange(self.n1 + 1) / self.periods[0]))
        e2 = np.exp(np.outer(x[:, 1], 2j * math.pi * np.arange(-self.n2, self.n2 + 1) / self.periods[1]))
        c = math.sqrt(2.0 / self.area)
        out = np.empty((len(x), self.m))
        col = 0
        if self.const:
            out[:, 0] = 1.0 / math.sqrt(self.area)
            col = 1
        nc = len(self.cos_freqs)
        if nc:
            z = e1[:, self.cos_freqs[:, 0]] * e2[:, self.cos_freqs[:, 1] + self.n2]
            out[:, col:col + nc] = c * z.real
            col += nc
        if len(self.sin_freqs):
            z = e1[:, self.sin_freqs[:, 0]] * e2[:, self.sin_freqs[:, 1] + self.n2]
            out[:, col:] = c * z.imag
        return out


def _select_features(spec: SpectralApproximation, rng: np.random.Generator) -> _Features:
    zero = np.all(spec.freqs == 0, axis=1)
    lam0 = spec.eigenvalues[zero]
    const = bool(lam0.size and rng.random() < lam0[0])
    nz = ~zero
    f, lam = spec.freqs[nz], spec.eigenvalues[nz]
    pick_cos = rng.random(len(lam)) < lam
    pick_sin = rng.random(len(lam)) < lam
    return _Features(spec, const, f[pick_cos], f[pick_sin])


def projection_sample(features: _Features, rng: np.random.Generator, torus: Window,
                      validate: bool = False) -> np.ndarray:
    """Sequential sampling of the projection DPP spanned by ``features``.

    The active basis ``Q`` (in feature coordinates) spans the part of the
    feature space not yet explained by accepted points; with ``k`` columns the
    next point has density |Q^T v(x)|^2 / k. Proposals are uniform on the
    torus and accepted with probability |Q^T v(x)|^2 / bound.

    Each acceptance yields a Householder reflector mapping the accepted
    coefficient vector onto the last active column, which is then dropped.
    Reflectors accumulate in compact WY form, Q = Q0 (I - Y T Y^T), and are
    folded into Q0 every ``block`` steps. Unused proposals are kept in a pool
    whose coefficients are updated reflector by reflector, so Q0 is only read
    in batched products.
    """
    m = features.m
    out = np.empty((m, 2))
    if m == 0:
        return out
    lo = np.array([torus.x0, torus.y0])
    span = np.array([torus.width, torus.height])
    bound = features.bound
    block = 32
    Q0 = np.eye(m)
    Y = np.zeros((m, 0))
    T = np.zeros((0, 0))
    pool_x = np.empty((0, 2))
    pool_p = np.empty((0, m))  # coefficients in the current (reflected) basis, all k0 columns
    for i in range(m):
        k = m - i
        k0 = Q0.shape[1]
        if validate:
            Qa = (Q0 - (Q0 @ Y) @ T @ Y.T) if Y.shape[1] else Q0
            _check_conditional(features, Qa[:, :k], torus)
        expect = bound * features.area / k  # mean proposals per acceptance
        proposals = 0
        while True:
            if len(pool_x) == 0:
                b = int(min(max(64, math.ceil(2 * expect)), 8192))
                pool_x = lo + span * rng.random((b, 2))
                pool_p = features(pool_x) @ Q0
                if Y.shape[1]:
                    pool_p -= ((pool_p @ Y) @ T) @ Y.T
            act = pool_p[:, :k]
            dens = np.einsum("ij,ij->i", act, act)
            acc = np.nonzero(rng.random(len(dens)) * bound < dens)[0]
            if acc.size:
                j = acc[0]
                break
            proposals += len(dens)
            pool_x = pool_x[:0]
            if proposals > MAX_PROPOSALS:
                raise SamplerStall(f"no acceptance after {proposals} proposals")
        out[i] = pool_x[j]
        c = pool_p[j, :k] / math.sqrt(dens[j])
        pool_x, pool_p = pool_x[j + 1:], pool_p[j + 1:]
        h = np.zeros(k0)
        h[:k] = c
        h[k - 1] -= 1.0
        hh = float(h @ h)
        if hh > 1e-30:
            tau = 2.0 / hh
            if Y.shape[1]:
                top = -tau * (T @ (Y.T @ h))
                T = np.block([[T, top[:, None]], [np.zeros((1, T.shape[1])), np.array([[tau]])]])
                Y = np.column_stack([Y, h])
            else:
                T = np.array([[tau]])
                Y = h[:, None]
            if len(pool_p):
                pool_p = pool_p - np.outer(pool_p @ h, tau * h)
        if k0 - (k - 1) >= block or k == 1:
            if Y.shape[1]:
                Q0 = Q0 - ((Q0 @ Y) @ T) @ Y.T
            Q0 = Q0[:, : k - 1].copy()
            pool_p = pool_p[:, : k - 1].copy()
            Y = np.zeros((k - 1, 0))
            T = np.zeros((0, 0))
    return out


def _check_conditional(features: _Features, Q: np.ndarray, torus: Window, n: int = 64) -> None:
    from .numerics import gauss_legendre_2d

    rule = gauss_legendre_2d(torus, n)
    P = features(rule.nodes) @ Q
    dens = np.einsum("ij,ij->i", P, P) / Q.shape[1]
    if np.any(dens < -1e-12):
        raise AssertionError("negative conditional density")
    mass = float(rule.weights @ dens)
    if abs(mass - 1.0) > 1e-3:
        raise AssertionError(f"conditional density mass {mass:.6f} != 1")


def sample_dpp(model: KernelModel, seed: SeedSpec, window: Window | None = None,
               validate: bool = False) -> PointPattern:
    window = window or model.window
    margin = existence_check(KernelModel(model.intensity, model.correlation, window, check=False))
    if margin > 1.0:
        raise ExistenceViolation(f"existence margin {margin:.4f} > 1")
    spec = spectral_approximation(model, window)
    rng = seed.generator("dpp")
    feats = _select_features(spec, rng)
    pts = projection_sample(feats, rng, spec.torus, validate=validate)
    pts = pts[window.contains(pts)] if len(pts) else pts.reshape(0, 2)
    rho_max = model.intensity.sup(window)
    keep_prob = model.intensity(pts) / rho_max if len(pts) else np.empty(0)
    thin = seed.generator("thin").random(len(pts)) < keep_prob
    return PointPattern(pts[thin], window)


def sample_poisson(intensity: IntensityModel, window: Window, seed: SeedSpec) -> PointPattern:
    rng = seed.generator("poisson")
    rho_max = intensity.sup(window)
    n = rng.poisson(rho_max * window.area)
    pts = np.column_stack([rng.uniform(window.x0, window.x1, n), rng.uniform(window.y0, window.y1, n)])
    if n:
        keep = rng.random(n) < intensity(pts) / rho_max
        pts = pts[keep]
    return PointPattern(pts, window)
