"""Special functions, quadrature rules, distance distributions, root solvers and
seeded random streams shared by the rest of the package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class NumericalError(RuntimeError):
    """Base class for solver failures."""


class NoBracket(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]``."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate window {self}")

    @classmethod
    def unit(cls, side: float = 1.0) -> "Window":
        return cls(0.0, side, 0.0, side)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def corners(self) -> np.ndarray:
        return np.array(
            [[self.x0, self.y0], [self.x1, self.y0], [self.x0, self.y1], [self.x1, self.y1]]
        )

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (
            (pts[:, 0] >= self.x0)
            & (pts[:, 0] <= self.x1)
            & (pts[:, 1] >= self.y0)
            & (pts[:, 1] <= self.y1)
        )

    def expand(self, margin: float) -> "Window":
        return Window(self.x0 - margin, self.x1 + margin, self.y0 - margin, self.y1 + margin)

    def to_list(self) -> list[float]:
        return [self.x0, self.x1, self.y0, self.y1]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ValueError("empty quadrature rule")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class SeedSpec:
    """A (master seed, replicate) pair; ``stream`` adds a named sub-stream."""

    master: int
    replicate: int = 0

    def __post_init__(self):
        if self.replicate < 0:
            raise ValueError("replicate index must be >= 0")

    def generator(self, label: str = "") -> np.random.Generator:
        # Philox is counter based: the stream depends only on the key, never on
        # how many other streams were drawn before it.
        words = [self.master & 0xFFFFFFFF, (self.master >> 32) & 0xFFFFFFFF, self.replicate]
        words += list(label.encode("utf-8"))
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, integer order 0..2

_SERIES_LIMIT = 8.0
_ASYMPTOTIC_LIMIT = 25.0


def _bessel_series(n: int, x: np.ndarray) -> np.ndarray:
    h = 0.5 * x
    term = h**n / math.factorial(n)
    total = term.copy()
    hh = h * h
    for k in range(1, 40):
        term = term * (-hh) / (k * (k + n))
        total += term
    return total


def _bessel_asymptotic(n: int, x: np.ndarray) -> np.ndarray:
    # Hankel expansion; at x >= 25 the truncation error is far below 1e-16.
    mu = 4.0 * n * n
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(24):
        if k > 0:
            term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        r = k % 4
        if r == 0:
            p += term
        elif r == 1:
            q += term
        elif r == 2:
            p -= term
        else:
            q -= term
    chi = x - (0.5 * n + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _bessel_miller(x: np.ndarray, nmax: int) -> np.ndarray:
    """Backward recurrence normalised by J0 + 2*sum(J_2k) = 1; rows are J_0..J_nmax."""
    start = int(2 * math.ceil((float(x.max()) + 30.0) / 2.0))
    upper = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    out = np.zeros((nmax + 1,) + x.shape)
    for k in range(start, 0, -1):
        upper, cur = cur, (2.0 * k / x) * cur - upper
        order = k - 1
        if order <= nmax:
            out[order] = cur
        if order > 0 and order % 2 == 0:
            norm += 2.0 * cur
        if np.abs(cur).max() > 1e200:
            scale = np.where(np.abs(cur) > 1e200, 1e-200, 1.0)
            cur, upper, norm, out = cur * scale, upper * scale, norm * scale, out * scale
    norm += cur
    return out / norm


def bessel_j(n: int, x) -> np.ndarray | float:
    """J_n(x) for n in {0, 1, 2}, vectorised, absolute error ~1e-15 everywhere."""
    if n not in (0, 1, 2):
        raise ValueError("only orders 0, 1, 2 are implemented")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    ax = np.abs(x).ravel()
    res = np.empty_like(ax)
    lo = ax < _SERIES_LIMIT
    hi = ax >= _ASYMPTOTIC_LIMIT
    mid = ~(lo | hi)
    if lo.any():
        res[lo] = _bessel_series(n, ax[lo])
    if hi.any():
        res[hi] = _bessel_asymptotic(n, ax[hi])
    if mid.any():
        res[mid] = _bessel_miller(ax[mid], n)[n]
    res = res.reshape(x.shape)
    if n % 2 == 1:
        res = np.where(x < 0, -res, res)
    return float(res) if scalar else res


def bessel_j1(x):
    return bessel_j(1, x)


# ---------------------------------------------------------------------------
# Quadrature


def gauss_legendre(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


def composite_gauss_legendre(breaks: Sequence[float], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on each consecutive pair of ``breaks`` (zero-length pieces skipped)."""
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            x, w = gauss_legendre(a, b, order)
            xs.append(x)
            ws.append(w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def gauss_legendre_2d(window: Window, order: int) -> QuadratureRule:
    """Tensor-product rule, exact per axis for polynomial degree <= 2*order - 1."""
    x, wx = gauss_legendre(window.x0, window.x1, order)
    y, wy = gauss_legendre(window.y0, window.y1, order)
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = np.outer(wx, wy)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


def _ray_exit(center: np.ndarray, theta: np.ndarray, window: Window) -> tuple[np.ndarray, np.ndarray]:
    """Parameter interval [t_in, t_out] (t >= 0) of the ray center + t*(cos, sin) inside window."""
    c, s = np.cos(theta), np.sin(theta)
    t_in = np.zeros_like(theta)
    t_out = np.full_like(theta, np.inf)
    for d, lo, hi, p in ((c, window.x0, window.x1, center[0]), (s, window.y0, window.y1, center[1])):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - p) / d
            tb = (hi - p) / d
        near = np.where(d > 0, ta, tb)
        far = np.where(d > 0, tb, ta)
        flat = np.abs(d) < 1e-300
        inside = (p >= lo) & (p <= hi)
        near = np.where(flat, np.where(inside, -np.inf, np.inf), near)
        far = np.where(flat, np.where(inside, np.inf, -np.inf), far)
        t_in = np.maximum(t_in, near)
        t_out = np.minimum(t_out, far)
    return t_in, t_out


def disc_quadrature(
    center, radius: float, window: Window, radial_order: int = 16, angular_order: int = 16
) -> QuadratureRule:
    """Polar rule for the disc ``{v : |v - center| <= radius}`` clipped to ``window``.

    Each angular direction integrates radially over exactly the part of the
    ray inside the window, so the rule integrates ``f * 1_W`` over the disc.
    Angular pieces are split at every direction where the clipped ray length
    changes formula, which keeps the angular integrand smooth on each piece.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    cx, cy = center
    breaks = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, 2.0 * math.pi]
    for px, py in window.corners:
        breaks.append(math.atan2(py - cy, px - cx) % (2 * math.pi))
    for dist, base in (
        (window.x1 - cx, 0.0),
        (cx - window.x0, math.pi),
        (window.y1 - cy, 0.5 * math.pi),
        (cy - window.y0, 1.5 * math.pi),
    ):
        if abs(dist) < radius:
            a = math.acos(dist / radius)
            breaks += [(base + a) % (2 * math.pi), (base - a) % (2 * math.pi)]
    breaks = np.unique(np.clip(breaks, 0.0, 2 * math.pi))
    theta, wtheta = composite_gauss_legendre(breaks, angular_order)
    t_in, t_out = _ray_exit(center, theta, window)
    t_out = np.minimum(t_out, radius)
    keep = t_out > t_in
    theta, wtheta, t_in, t_out = theta[keep], wtheta[keep], t_in[keep], t_out[keep]
    if theta.size == 0:
        raise ValueError("disc does not meet the window")
    u, wu = np.polynomial.legendre.leggauss(radial_order)
    half = 0.5 * (t_out - t_in)[:, None]
    r = t_in[:, None] + half * (u[None, :] + 1.0)
    w = wtheta[:, None] * half * wu[None, :] * r
    nodes = np.stack([cx + r * np.cos(theta)[:, None], cy + r * np.sin(theta)[:, None]], axis=-1)
    nodes = nodes.reshape(-1, 2)
    w = w.ravel()
    pos = w > 0
    return QuadratureRule(nodes[pos], w[pos])


# ---------------------------------------------------------------------------
# Distance between two uniform points of a rectangle


def set_covariance(window: Window, t) -> np.ndarray:
    """gamma_W(t) = |W intersect (W - t)| for a rectangle."""
    t = np.asarray(t, dtype=float)
    return np.maximum(window.width - np.abs(t[..., 0]), 0.0) * np.maximum(
        window.height - np.abs(t[..., 1]), 0.0
    )


def _angular_set_covariance(window: Window, r: np.ndarray, order: int = 12) -> np.ndarray:
    """Integral of gamma_W(r cos th, r sin th) over th in [0, 2*pi) by polar quadrature."""
    a, b = window.width, window.height
    r = np.asarray(r, dtype=float)
    rr = np.maximum(r, 1e-300)[..., None]
    # in the first quadrant gamma_W > 0 exactly for acos(a/r) < th < asin(b/r), smooth in between
    lo = np.arccos(np.minimum(1.0, a / rr))
    hi = np.arcsin(np.minimum(1.0, b / rr))
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.maximum(hi - lo, 0.0)
    th = lo + half * (t + 1.0)
    vals = (a - rr * np.cos(th)) * (b - rr * np.sin(th))
    return 4.0 * np.sum(half * w * vals, axis=-1)


def distance_density(window: Window, r) -> np.ndarray:
    """Density of |U - V| for U, V independent uniform on ``window``."""
    r = np.asarray(r, dtype=float)
    return r * _angular_set_covariance(window, r) / window.area**2


def distance_cdf(window: Window, r: float, order: int = 16) -> float:
    """F(r) = |W|^-2 * integral over |t| <= r of gamma_W(t) dt."""
    if r < 0:
        raise ValueError("r must be >= 0")
    r = min(r, window.diameter)
    if r == 0:
        return 0.0
    # square-root kinks just past each side length: grade panels geometrically there
    graded = [side + (window.diameter - side) * 0.5**k for side in (window.width, window.height) for k in range(1, 30)]
    breaks = sorted({0.0, r, *(x for x in (window.width, window.height, *graded) if x < r)})
    s, w = composite_gauss_legendre(breaks, order)
    return float(min(1.0, max(0.0, np.dot(w, distance_density(window, s)))))


def distance_breaks(window: Window, upper: float) -> list[float]:
    """Kink locations of the distance density below ``upper``."""
    return [x for x in (window.width, window.height) if x < upper]


# ---------------------------------------------------------------------------
# Root finding


def brent_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-9,
    maxiter: int = 200,
    flo: float | None = None,
    fhi: float | None = None,
) -> float:
    """Brent's method on ``[lo, hi]``; stops when ``|f| <= tol`` or the bracket is narrower than ``tol``.

    Never evaluates ``f`` outside the bracket.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = lo, hi
    fa = f(a) if flo is None else flo
    fb = f(b) if fhi is None else fhi
    if fa * fb > 0:
        raise NoBracket(f"f({lo})={fa:g} and f({hi})={fb:g} have the same sign")
    if abs(fa) <= tol:
        return a
    if abs(fb) <= tol:
        return b
    c, fc = a, fa
    d = e = b - a
    for _ in range(maxiter):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        m = 0.5 * (c - b)
        xtol = 2.0 * np.finfo(float).eps * abs(b) + 0.5 * tol
        if abs(fb) <= tol or abs(m) <= xtol:
            return b
        if abs(e) >= xtol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p, q = 2.0 * m * s, 1.0 - s
            else:
                q_, r_ = fa / fc, fb / fc
                p = s * (2.0 * m * q_ * (q_ - r_) - (b - a) * (r_ - 1.0))
                q = (q_ - 1.0) * (r_ - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * m * q - abs(xtol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        b = b + d if abs(d) > xtol else b + math.copysign(xtol, m)
        fb = f(b)
    raise MaxIterations(f"brent_root did not converge in {maxiter} iterations")


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, fx: np.ndarray | None = None,
                step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with relative steps."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h))
    return np.column_stack(cols)


def damped_newton(
    f: Callable[[np.ndarray], np.ndarray],
    x0,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    box: tuple[np.ndarray, np.ndarray] | None = None,
    tol: float = 1e-7,
    maxiter: int = 100,
    max_halvings: int = 30,
) -> tuple[np.ndarray, int]:
    """Newton iteration with step halving; returns ``(root, iterations)``.

    A step is halved while it leaves the open box or fails to decrease the
    sup-norm of ``f``.
    """
    x = np.asarray(x0, dtype=float).copy()
    if jacobian is None:
        jacobian = lambda z: fd_jacobian(f, z)  # noqa: E731
    if box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        if np.any(x <= lo) or np.any(x >= hi):
            raise ValueError("x0 must lie strictly inside the box")
    fx = np.atleast_1d(np.asarray(f(x), dtype=float))
    for it in range(maxiter):
        norm = np.max(np.abs(fx))
        if norm <= tol:
            return x, it
        J = np.atleast_2d(jacobian(x))
        if np.linalg.cond(J) > 1e12:
            raise SingularJacobian("Jacobian condition number above 1e12")
        step = np.linalg.solve(J, -fx)
        lam = 1.0
        for _ in range(max_halvings + 1):
            cand = x + lam * step
            ok_box = box is None or (np.all(cand > lo) and np.all(cand < hi))
            if ok_box:
                fc = np.atleast_1d(np.asarray(f(cand), dtype=float))
                if np.max(np.abs(fc)) < norm:
                    break
            lam *= 0.5
        else:
            raise MaxIterations("step halving exhausted")
        x, fx = cand, fc
    if np.max(np.abs(fx)) <= tol:
        return x, maxiter
    raise MaxIterations(f"damped_newton did not converge in {maxiter} iterations")
