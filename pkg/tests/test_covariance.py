import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dppest.inference.covariance import SingularH, covariance_and_ci, coverage, sandwich


def test_identity_coverage():
    rng = np.random.default_rng(0)
    e = rng.standard_normal((2000, 2))
    theta_hat = 1.0 + rng.standard_normal((2000, 2))  # estimates whose error law is the e-law
    est = covariance_and_ci(e, np.eye(2), 1.0, theta_hat)
    cov = coverage(est.ci, [1.0, 1.0])
    assert np.all((cov > 0.93) & (cov < 0.97))
    assert np.allclose(est.se, 1.0, atol=0.05)


def test_sandwich_scaling():
    H = np.array([[2.0, 0.0], [1.0, 4.0]])
    S = np.array([[3.0, 0.5], [0.5, 1.0]])
    Hi = np.linalg.inv(H)
    assert np.allclose(sandwich(H, S, 3.0), Hi @ S @ Hi.T / 9.0)


@given(arrays(float, (40, 2), elements=st.floats(-10, 10)),
       arrays(float, (2, 2), elements=st.floats(-5, 5)))
def test_covariance_symmetric_psd(e, H):
    try:
        est = covariance_and_ci(e, H, 2.0)
    except SingularH:
        return
    C = est.covariance
    assert np.allclose(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-9 * max(1.0, np.abs(C).max())


def test_singular_H():
    with pytest.raises(SingularH):
        covariance_and_ci(np.ones((40, 2)), np.zeros((2, 2)), 1.0)


def test_min_replicates():
    with pytest.raises(ValueError):
        covariance_and_ci(np.zeros((29, 1)), np.eye(1), 1.0)


def test_ci_level():
    est = covariance_and_ci(np.random.default_rng(1).standard_normal((100, 1)), np.eye(1), 1.0, [0.0], level=0.9)
    half = est.ci[0, 1]
    assert half == pytest.approx(1.6448536269514722 * est.se[0], rel=1e-12)
