"""Fast oracle and invariant checks behind ``dppest check``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, getcontext
from typing import Callable

import numpy as np

from ..inference.equations import integral_term, pair_sum, sensitivity_H
from ..inference.testfunctions import AdaptiveCL, TruncatedCL
from ..kernels import (
    BesselType,
    Gaussian,
    Homogeneous,
    KernelModel,
    LogLinear,
    adaptive_range,
    existence_check,
    pair_corr_and_grad,
)
from ..numerics import SeedSpec, Window, bessel_j1, distance_cdf
from ..sampler import sample_dpp


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28} {self.detail}"


def j1_decimal(x: float, digits: int = 80) -> float:
    """J1 by its power series in ``digits``-digit decimal arithmetic."""
    getcontext().prec = digits
    h = Decimal(repr(float(x))) / 2
    h2 = h * h
    term = h  # k = 0
    total = term
    k = 0
    tiny = Decimal(10) ** -(digits - 20)
    while True:
        k += 1
        term = -term * h2 / (k * (k + 1))
        total += term
        if abs(term) < tiny and k > abs(float(h)):
            break
    return float(total)


def check_bessel(tol: float = 1e-12) -> CheckResult:
    xs = np.linspace(-50.0, 50.0, 401)
    err = max(abs(float(bessel_j1(x)) - j1_decimal(x)) for x in xs)
    return CheckResult("bessel_j1 vs series", err <= tol, f"max abs error {err:.2e} on [-50, 50]")


def check_distance_cdf(n_pairs: int = 400_000, tol: float = 5e-3) -> CheckResult:
    rng = SeedSpec(1, 0).generator("check-cdf")
    u = rng.random((n_pairs, 2))
    v = rng.random((n_pairs, 2))
    d = np.sort(np.hypot(*(u - v).T))
    rs = np.linspace(0.05, 1.4, 28)
    emp = np.searchsorted(d, rs) / n_pairs
    num = np.array([distance_cdf(Window.unit(), r) for r in rs])
    err = float(np.max(np.abs(emp - num)))
    return CheckResult("distance_cdf vs MC", err <= tol, f"sup error {err:.2e} ({n_pairs} pairs)")


def check_gradients(tol: float = 1e-5) -> CheckResult:
    rng = SeedSpec(1, 0).generator("check-grad")
    worst = 0.0
    for fam in (BesselType, Gaussian):
        for _ in range(20):
            a = rng.uniform(0.01, 0.08)
            r = rng.uniform(0.05, 2.5) * a
            _, dg = pair_corr_and_grad(fam(a), r)
            h = 1e-6 * a
            fd = (pair_corr_and_grad(fam(a + h), r)[0] - pair_corr_and_grad(fam(a - h), r)[0]) / (2 * h)
            if abs(fd) > 1e-8:
                worst = max(worst, abs(dg - fd) / abs(fd))
    # H_n entries against differences of the integral term in the intensity-side parameters
    for model, tf in ((KernelModel(Homogeneous(100.0), BesselType(0.05)), AdaptiveCL(0.01)),
                      (KernelModel(LogLinear((math.log(20.0), 4.0)), BesselType(0.01)), TruncatedCL(0.05))):
        H = sensitivity_H(model, "two-step", tf)
        th = model.theta
        for k in range(th.size):
            d = np.zeros_like(th)
            d[k] = 1e-6 * max(1.0, abs(th[k]))
            fd = (integral_term(model, tf, model_rho=model.with_theta(th + d))
                  - integral_term(model, tf, model_rho=model.with_theta(th - d)))[0] / (2 * d[k]) / model.window.area
            worst = max(worst, abs(H[-1, k] - fd) / abs(fd))
    return CheckResult("analytic gradients vs FD", worst <= tol, f"max relative error {worst:.2e}")


def check_existence() -> CheckResult:
    cells = [(50, 0.02), (50, 0.04), (50, 0.07), (100, 0.01), (100, 0.03), (100, 0.05),
             (1000, 0.005), (1000, 0.01), (1000, 0.015)]
    ok = all(existence_check(KernelModel(Homogeneous(r), BesselType(a), check=False)) <= 1 for r, a in cells)
    ok &= all(existence_check(KernelModel(LogLinear((math.log(20.0), 4.0)), BesselType(a), check=False)) <= 1
              for a in (0.005, 0.01, 0.015))
    bad = existence_check(KernelModel(Homogeneous(1000), BesselType(0.018), check=False))
    return CheckResult("existence boundary", ok and bad > 1, f"rho=1000 alpha=0.018 margin {bad:.4f}")


def check_adaptive_range() -> CheckResult:
    worst = 0.0
    ok = True
    for fam in (BesselType, Gaussian):
        for a in (0.005, 0.01, 0.05):
            c = fam(a)
            r = adaptive_range(c, 0.01)
            worst = max(worst, abs(float(c.C(r)) ** 2 - 0.01))
            probe = r * np.linspace(1.0001, 20.0, 4000)
            ok &= bool(np.all(c.C(probe) ** 2 < 0.01))
    return CheckResult("adaptive range", ok and worst <= 1e-8, f"|C(r)^2 - eps| <= {worst:.1e}")


def check_campbell(replicates: int = 100) -> CheckResult:
    model = KernelModel(Homogeneous(100.0), BesselType(0.05))
    worst = 0.0
    for tf in (TruncatedCL(0.1), AdaptiveCL(0.01)):
        integral = float(integral_term(model, tf)[0])
        sums = np.array([pair_sum(sample_dpp(model, SeedSpec(2, i)), model, tf)[0] for i in range(replicates)])
        z = (sums.mean() - integral) / (sums.std(ddof=1) / math.sqrt(replicates))
        worst = max(worst, abs(z))
    return CheckResult("Campbell unbiasedness", worst <= 3.0, f"max |z| {worst:.2f} over {replicates} replicates")


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "bessel": check_bessel,
    "cdf": check_distance_cdf,
    "gradients": check_gradients,
    "existence": check_existence,
    "range": check_adaptive_range,
    "campbell": check_campbell,
}


def run_checks(names=None) -> list[CheckResult]:
    names = names or list(CHECKS)
    return [CHECKS[n]() for n in names]
