import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dppest.pairs import close_pairs


def brute(points, radius):
    n = len(points)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.hypot(*(points[i] - points[j])))
            if d <= radius:
                out.append((i, j))
    return out


@given(arrays(float, st.tuples(st.integers(0, 60), st.just(2)), elements=st.floats(-3, 3)), st.floats(0.01, 2.0))
def test_close_pairs_matches_brute_force(points, radius):
    i, j, d = close_pairs(points, radius)
    assert list(zip(i.tolist(), j.tolist())) == brute(points, radius)
    assert np.allclose(d, np.hypot(*(points[i] - points[j]).T))


def test_far_point_adds_no_pairs():
    pts = np.random.default_rng(0).random((200, 2))
    a = close_pairs(pts, 0.05)
    b = close_pairs(np.vstack([pts, [[50.0, 50.0]]]), 0.05)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_degenerate_inputs():
    assert len(close_pairs(np.zeros((0, 2)), 0.1)[0]) == 0
    assert len(close_pairs(np.zeros((1, 2)), 0.1)[0]) == 0
    assert len(close_pairs(np.random.default_rng(0).random((5, 2)), 0.0)[0]) == 0
