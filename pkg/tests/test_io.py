import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dppest.inference.fitting import FitResult
from dppest.io import read_fit_result, read_pattern, write_fit_result, write_pattern
from dppest.kernels import PointPattern
from dppest.numerics import Window

coords = st.floats(0, 1, allow_subnormal=True)


@given(arrays(float, st.tuples(st.integers(0, 30), st.just(2)), elements=coords, unique=True))
def test_pattern_roundtrip_bit_exact(tmp_path_factory, pts):
    pts = np.unique(pts, axis=0)
    pat = PointPattern(pts, Window.unit())
    path = tmp_path_factory.mktemp("p") / "pat.csv"
    write_pattern(pat, path, model={"a": 1}, seed={"master": 1, "replicate": 2})
    back, meta = read_pattern(path)
    assert back.points.tobytes() == pat.points.tobytes()
    assert back.window == pat.window
    assert meta["seed"] == {"master": 1, "replicate": 2} and meta["n"] == len(pts)


def test_csv_header(tmp_path):
    path = write_pattern(PointPattern([(0.1, 0.2)], Window.unit()), tmp_path / "p.csv")
    assert path.read_text().splitlines()[0] == "x,y"
    (tmp_path / "bad.csv").write_text("a,b\n0.1,0.2\n")
    with pytest.raises(ValueError):
        read_pattern(tmp_path / "bad.csv", Window.unit())


def test_missing_sidecar(tmp_path):
    (tmp_path / "p.csv").write_text("x,y\n0.1,0.2\n")
    with pytest.raises(ValueError):
        read_pattern(tmp_path / "p.csv")
    pat, meta = read_pattern(tmp_path / "p.csv", Window.unit())
    assert pat.n == 1 and meta == {}


def test_fit_result_roundtrip(tmp_path):
    res = FitResult([101.0, 0.0501234567890123], ["rho", "alpha"], "Converged", 1e-10, 12, 0.148,
                    H=[[0.01, 0.0], [3.5, 1e4]], method="adaptive:eps=0.01")
    back = read_fit_result(write_fit_result(res, tmp_path / "r.json"))
    assert back == res


def test_fit_result_nonfinite_as_null(tmp_path):
    res = FitResult([math.nan, math.nan], ["rho", "alpha"], "NoBracket", math.inf, 0, None)
    path = write_fit_result(res, tmp_path / "r.json")
    assert "NaN" not in path.read_text() and "Infinity" not in path.read_text()
    back = read_fit_result(path)
    assert back.status == "NoBracket"
    assert all(math.isnan(t) for t in back.theta)
    assert back.residual == math.inf
