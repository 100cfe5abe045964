import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dppest.inference.equations import integral_term
from dppest.inference.fitting import (
    CONVERGED,
    NO_BRACKET,
    FitConfig,
    FitResult,
    alpha_upper,
    fit,
    fit_intensity,
    select_root,
)
from dppest.inference.testfunctions import AdaptiveCL, TruncatedCL
from dppest.io import read_fit_result, read_pattern
from dppest.kernels import BesselType, Gaussian, Homogeneous, KernelModel, LogLinear, PointPattern
from dppest.numerics import SeedSpec, Window
from dppest.sampler import sample_dpp, sample_poisson

FIXTURES = Path(__file__).parent / "fixtures"
M100 = KernelModel(Homogeneous(100.0), BesselType(0.05))


# ---------------------------------------------------------------- root selection


def test_select_root_picks_largest_quasi_objective():
    # f = Q' for Q with local maxima at 0.2 (lower) and 0.7 (higher)
    f = lambda a: -(a - 0.2) * (a - 0.45) * (a - 0.7) * (1 + 3 * (a > 0.45))
    grid = np.linspace(0.01, 1.0, 32)
    root, status, _, _ = select_root(f, grid, 1e-12)
    Q = lambda a: float(np.trapezoid([f(x) for x in np.linspace(0.01, a, 2001)], np.linspace(0.01, a, 2001)))
    assert status == CONVERGED
    assert root == pytest.approx(0.7, abs=1e-10)
    assert Q(0.7) > Q(0.2)


def test_select_root_no_bracket():
    # increasing objective: the supremum is at the upper end
    root, status, _, _ = select_root(lambda a: 1.0 + a, np.linspace(0.1, 1.0, 8), 1e-9)
    assert status == NO_BRACKET and root == 1.0
    root, status, _, _ = select_root(lambda a: -2.0 + a, np.linspace(0.1, 1.0, 8), 1e-9)
    assert status == NO_BRACKET and root == 0.1
    # small |f| near the lower end must not drag a monotone increase there
    root, status, _, _ = select_root(lambda a: a**4, np.linspace(0.1, 1.0, 8), 1e-9)
    assert root == 1.0


def test_select_root_falls_back_to_upward_crossing():
    root, status, _, _ = select_root(lambda a: a - 0.33, np.linspace(0.0, 1.0, 9), 1e-12)
    assert status == CONVERGED and root == pytest.approx(0.33, abs=1e-11)


def test_alpha_upper():
    assert alpha_upper("bessel", 100.0) == pytest.approx((1 - 1e-6) / math.sqrt(100 * math.pi), rel=1e-14)
    assert alpha_upper("gaussian", 100.0) == pytest.approx((1 - 1e-6) / math.sqrt(100 * math.pi), rel=1e-14)


# ---------------------------------------------------------------- self-consistency


@pytest.mark.parametrize("tf", [TruncatedCL(0.1), AdaptiveCL(0.01)], ids=lambda t: t.label)
@pytest.mark.parametrize("model", [M100, KernelModel(LogLinear((math.log(20.0), 4.0)), BesselType(0.01)),
                                   KernelModel(Homogeneous(100.0), Gaussian(0.03))],
                         ids=["bessel", "loglinear", "gaussian"])
def test_noise_free_root_is_truth(model, tf):
    """Replace the pair sum by its expectation; the alpha root must be the truth."""
    corr = model.correlation

    def u(alpha):
        m = KernelModel(model.intensity, corr.with_alpha(alpha), model.window, check=False)
        return float((integral_term(m, tf, model_rho=model) - integral_term(m, tf))[0])

    family = "bessel" if isinstance(corr, BesselType) else "gaussian"
    upper = alpha_upper(family, model.intensity.sup(model.window))
    grid = upper * np.arange(1, 33) / 32
    root, status, _, _ = select_root(u, grid, 1e-12)
    assert status == CONVERGED
    assert root == pytest.approx(corr.alpha, rel=1e-7)


# ---------------------------------------------------------------- fits


def test_fit_recovers_truth_roughly():
    for i in range(3):
        pat = sample_dpp(M100, SeedSpec(20, i))
        res = fit(pat, "adaptive:eps=0.01")
        assert res.converged
        assert abs(res.alpha - 0.05) < 0.02
        assert res.theta[0] == pat.n
        assert res.practical_range == pytest.approx(AdaptiveCL(0.01).radius(BesselType(res.alpha)))
        H = np.array(res.H)
        assert H[0, 1] == 0.0 and H[0, 0] == pytest.approx(1 / pat.n)


def test_two_step_intensity_invariant_to_test_function():
    ll = KernelModel(LogLinear((math.log(20.0), 4.0)), BesselType(0.01))
    pat, _ = read_pattern(FIXTURES / "loglinear.csv")
    cfg = FitConfig(intensity="loglinear")
    a = fit(pat, "adaptive:eps=0.01", cfg)
    b = fit(pat, "truncated:R=0.05", cfg)
    assert a.theta[:2] == b.theta[:2]
    beta, _ = fit_intensity(pat, cfg)
    assert list(beta.params) == a.theta[:2]
    assert np.abs(np.array(a.theta[:2]) - ll.intensity.params).max() < 0.5


def test_poisson_pattern_alpha_near_zero():
    pat = sample_poisson(Homogeneous(200.0), Window.unit(), SeedSpec(21, 0))
    res = fit(pat, "truncated:R=0.05")
    upper = alpha_upper("bessel", pat.n)
    assert res.alpha < 0.35 * upper or not res.converged


def test_empty_pattern_no_bracket():
    res = fit(PointPattern(np.zeros((0, 2)), Window.unit()), "adaptive:eps=0.01")
    assert res.status == NO_BRACKET
    assert all(math.isnan(t) for t in res.theta)


def test_simultaneous_requires_homogeneous():
    with pytest.raises(ValueError):
        FitConfig(layout="simultaneous", intensity="loglinear")


def test_simultaneous_fit_shape():
    pat, _ = read_pattern(FIXTURES / "homogeneous.csv")
    res = fit(pat, "adaptive:eps=0.01", FitConfig(layout="simultaneous"))
    assert res.converged and res.names == ["rho", "alpha"]
    assert np.array(res.H).shape == (2, 2)


@pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.fit.json")), ids=lambda p: p.name)
def test_golden_fit_results(path):
    case, method, layout = path.name[: -len(".fit.json")].split("_")
    golden = read_fit_result(path)
    pat, meta = read_pattern(FIXTURES / f"{case}.csv")
    res = fit(pat, golden.method, FitConfig(layout=golden.layout, intensity=case))
    assert res.status == golden.status
    assert np.allclose(res.theta, golden.theta, rtol=1e-9, atol=0)
    assert res.practical_range == pytest.approx(golden.practical_range, rel=1e-9)
    assert np.allclose(res.H, golden.H, rtol=1e-8)


def test_fit_result_roundtrip():
    res = FitResult([1.0, 0.05], ["rho", "alpha"], CONVERGED, 1e-9, 3, 0.1)
    assert FitResult.from_dict(json.loads(res.to_json())) == res
    assert "rho=1" in res.summary()
