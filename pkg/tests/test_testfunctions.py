import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dppest.inference.testfunctions import (
    AdaptiveCL,
    DegeneratePair,
    TruncatedCL,
    f_adaptive,
    f_truncated,
    parse_method,
    radial_breaks,
    weight_w,
)
from dppest.kernels import BesselType, Gaussian, Homogeneous, KernelModel, LogLinear, adaptive_range, pair_corr_and_grad

M100 = KernelModel(Homogeneous(100.0), BesselType(0.05))


def test_weight_examples():
    assert weight_w(0.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert weight_w(1.0) == 0.0
    assert weight_w(1.5) == 0.0
    assert weight_w(-1.0) == 0.0
    assert weight_w(0.5) == pytest.approx(math.exp(-4 / 3), rel=1e-15)


def test_weight_smooth_at_edge():
    # every derivative vanishes at 1: w(1 - h) / h^k -> 0
    for k in (1, 2, 5, 10):
        assert weight_w(1 - 1e-3) / 1e-3**k < 1e-100


@given(st.floats(-2, 2))
def test_weight_range_and_symmetry(r):
    assert 0 <= weight_w(r) <= math.exp(-1)
    assert weight_w(r) == weight_w(-r)


def test_truncated_examples():
    assert np.all(f_truncated((0, 0), (0.2, 0), M100, 0.1) == 0)
    r = 0.05
    _, dg = pair_corr_and_grad(M100.correlation, r)
    g = 1 - float(M100.correlation.C(r)) ** 2
    assert f_truncated((0.2, 0.2), (0.25, 0.2), M100, 0.1)[0] == pytest.approx(dg / g, rel=1e-14)


def test_truncated_gradient_fd():
    r, a, h = 0.05, 0.05, 1e-6 * 0.05

    def logg(alpha):
        return math.log(1 - float(BesselType(alpha).C(r)) ** 2)

    fd = (logg(a + h) - logg(a - h)) / (2 * h)
    assert f_truncated((0, 0), (r, 0), M100, 0.1)[0] == pytest.approx(fd, rel=1e-5)


def test_truncated_independent_of_beta():
    a = KernelModel(LogLinear((1.0, 2.0)), BesselType(0.01))
    b = KernelModel(LogLinear((3.0, -1.0)), BesselType(0.01))
    assert f_truncated((0.1, 0.1), (0.11, 0.1), a, 0.05) == f_truncated((0.1, 0.1), (0.11, 0.1), b, 0.05)


def test_adaptive_support_edge_is_zero():
    r = adaptive_range(M100.correlation, 0.01)
    assert np.all(f_adaptive((0, 0), (r, 0), M100, 0.01) == 0)
    assert np.all(f_adaptive((0, 0), (1.01 * r, 0), M100, 0.01) == 0)


def test_adaptive_near_zero_weight():
    tf = AdaptiveCL(0.01)
    assert tf.weight(1e-7, M100.correlation) == pytest.approx(weight_w(0.01), rel=1e-9)
    assert weight_w(0.01) == pytest.approx(math.exp(-1), rel=2e-4)


def test_adaptive_radius_at_alpha_001():
    assert AdaptiveCL(0.01).radius(BesselType(0.01)) == pytest.approx(0.028, abs=0.005)


def test_simultaneous_layout_shape():
    m = KernelModel(LogLinear((math.log(20.0), 4.0)), BesselType(0.01))
    out = f_truncated((0.1, 0.1), (0.11, 0.1), m, 0.05, layout="simultaneous")
    assert out.shape == (3,)
    # beta block is the weight times z(u) + z(v)
    assert np.allclose(out[:2], [2.0, 0.21])


def test_coincident_points_rejected():
    with pytest.raises(ValueError):
        f_truncated((0, 0), (0, 0), M100, 0.1)


def test_degenerate_pair(monkeypatch):
    import dppest.inference.testfunctions as tfm

    monkeypatch.setattr(tfm, "pair_corr_and_grad", lambda corr, r: (np.zeros_like(r), np.ones_like(r)))
    with pytest.raises(DegeneratePair):
        f_truncated((0, 0), (0.01, 0), M100, 0.1)


def test_parse_method():
    assert parse_method("truncated:R=0.1") == TruncatedCL(0.1)
    assert parse_method("adaptive:eps=0.05") == AdaptiveCL(0.05)
    assert parse_method("adaptive") == AdaptiveCL(0.01)
    for bad in ("nope:R=1", "truncated:R=-1", "adaptive:eps=1.5"):
        with pytest.raises((ValueError, KeyError)):
            parse_method(bad)


@given(st.sampled_from([BesselType, Gaussian]), st.floats(0.003, 0.08),
       st.sampled_from([TruncatedCL(0.05), TruncatedCL(0.25), AdaptiveCL(0.01), AdaptiveCL(0.05)]))
def test_radial_breaks_cover_support(fam, alpha, tf):
    corr = fam(alpha)
    b = radial_breaks(tf, corr, panels_per_alpha=4)
    assert b == sorted(b)
    for lo, hi in tf.support(corr):
        assert lo in b and hi in b
    assert max(np.diff(b)) <= max(alpha, min(tf.support(corr)[-1][1], 1.0))
