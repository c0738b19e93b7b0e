import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lvgp_fusion.errors import SingularMatrixError
from lvgp_fusion.kernel import (
    MixedPoint,
    corr_matrix,
    cross_corr,
    embed,
    gaussian_corr,
    latent_sqdist,
    level_sqdist,
    mixed_corr,
)

coords = st.floats(-3, 3, allow_nan=False)


def dense_corr(points, phi):
    """Oracle: element-by-element build with math.exp."""
    n = len(points)
    out = [[0.0] * n for _ in range(n)]
    for i, (xi, zi) in enumerate(points):
        for j, (xj, zj) in enumerate(points):
            s = sum(p * (a - b) ** 2 for p, a, b in zip(phi, xi, xj))
            s += sum((a - b) ** 2 for a, b in zip(zi, zj))
            out[i][j] = math.exp(-s)
    return np.array(out)


def test_gaussian_corr_examples():
    assert gaussian_corr([0.3, 0.7], [0.3, 0.7], [2.0, 5.0]) == 1.0
    assert gaussian_corr([0.0], [1.0], [1.0]) == pytest.approx(0.3678794, abs=1e-7)
    assert gaussian_corr([0, 0], [1, 1], [0.5, 0.5]) == pytest.approx(0.3678794, abs=1e-7)
    with pytest.raises(ValueError):
        gaussian_corr([0, 0], [1], [1, 1])
    with pytest.raises(ValueError):
        gaussian_corr([0], [1], [0.0])


def test_mixed_corr_examples():
    phi = [1.0]
    assert mixed_corr(MixedPoint([0.2], [0.5, 0.5]), MixedPoint([0.2], [0.5, 0.5]), phi) == 1.0
    assert mixed_corr(MixedPoint([0.2], [0, 0]), MixedPoint([0.2], [1, 0]), phi) == pytest.approx(math.exp(-1))
    assert mixed_corr(MixedPoint([0.0], [0, 0]), MixedPoint([1.0], [0, 1]), phi) == pytest.approx(0.1353353, abs=1e-7)
    with pytest.raises(ValueError):
        mixed_corr(MixedPoint([0.0], [0, 0]), MixedPoint([0.0], [0, 0, 1, 1]), phi)


def test_corr_matrix_small_cases():
    f = corr_matrix([MixedPoint([0.4], [])], [1.0], nugget=1e-3)
    np.testing.assert_array_equal(f.C, [[1.001]])
    f = corr_matrix([MixedPoint([0.4], []), MixedPoint([0.4], [])], [1.0], nugget=1e-6)
    np.testing.assert_array_equal(f.C, [[1 + 1e-6, 1.0], [1.0, 1 + 1e-6]])
    assert f.nugget == 1e-6
    np.testing.assert_allclose(f.L @ f.L.T, f.C, atol=1e-15)


def test_corr_matrix_three_points_vs_oracle():
    pts = [([0.0], []), ([0.5], []), ([1.0], [])]
    f = corr_matrix([MixedPoint(x, z) for x, z in pts], [1.0], nugget=0.0)
    expected = dense_corr(pts, [1.0])
    np.testing.assert_allclose(expected[0], [1.0, math.exp(-0.25), math.exp(-1.0)], rtol=0, atol=0)
    np.testing.assert_allclose(f.C, expected, rtol=1e-15, atol=0)


def test_corr_matrix_mixed_vs_oracle():
    rng = np.random.default_rng(5)
    pts = [(rng.uniform(size=2).tolist(), rng.uniform(-2, 2, size=4).tolist()) for _ in range(6)]
    phi = [3.0, 0.4]
    f = corr_matrix([MixedPoint(x, z) for x, z in pts], phi, nugget=0.0)
    np.testing.assert_allclose(f.C, dense_corr(pts, phi), rtol=1e-14)


def test_nugget_escalation_and_failure():
    R = np.ones((3, 3))
    R[0, 1] = R[1, 0] = 1.0 + 1e-3  # indefinite at tiny nuggets
    from lvgp_fusion.kernel import factor_with_nugget

    f = factor_with_nugget(R, 1e-6)
    assert f.nugget > 1e-6
    with pytest.raises(SingularMatrixError):
        factor_with_nugget(R, 1e-6, escalate=False)
    bad = np.ones((2, 2)) * 2.0
    bad[0, 1] = bad[1, 0] = 5.0
    with pytest.raises(SingularMatrixError, match="nugget"):
        factor_with_nugget(bad, 1e-6)


def test_cross_corr():
    train = [MixedPoint([0.1, 0.2], [0, 0]), MixedPoint([0.9, 0.4], [1, 0.5])]
    r = cross_corr(train[1], train, [2.0, 3.0])
    assert r[1] == 1.0
    oracle = [gaussian_corr([0.9, 0.4, 1, 0.5], [0.1, 0.2, 0, 0], [2.0, 3.0, 1.0, 1.0]), 1.0]
    np.testing.assert_allclose(r, oracle, rtol=1e-15)
    far = MixedPoint([8.0, 8.0], [0, 0])
    assert np.all(cross_corr(far, train, [1.0, 1.0]) < 2e-22)
    with pytest.raises(ValueError):
        cross_corr(MixedPoint([0.0], [0, 0]), train, [1.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, 3, elements=st.floats(-2, 2)),
    arrays(np.float64, 3, elements=st.floats(-2, 2)),
    arrays(np.float64, 4, elements=coords),
    arrays(np.float64, 4, elements=coords),
    arrays(np.float64, 3, elements=st.floats(1e-4, 1e4)),
)
def test_symmetry_and_range(x, x2, z, z2, phi):
    a, b = MixedPoint(x, z), MixedPoint(x2, z2)
    c = mixed_corr(a, b, phi)
    assert c == mixed_corr(b, a, phi)
    assert 0.0 <= c <= 1.0
    assert mixed_corr(a, a, phi) == 1.0


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, 2, elements=st.floats(-2, 2)),
    arrays(np.float64, 2, elements=st.floats(-2, 2)),
    arrays(np.float64, 2, elements=st.floats(1e-3, 1e3)),
)
def test_reduction_to_gaussian(x, x2, phi):
    assert mixed_corr(MixedPoint(x, []), MixedPoint(x2, []), phi) == gaussian_corr(x, x2, phi)


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, (4, 2), elements=coords),
    st.floats(0, 2 * math.pi),
    arrays(np.float64, 2, elements=st.floats(-2, 2)),
    st.booleans(),
)
def test_rigid_motion_invariance(levels, angle, shift, reflect):
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    if reflect:
        rot = rot @ np.diag([1.0, -1.0])
    moved = levels @ rot.T + shift
    codes = np.array([[0], [1], [2], [3], [1]])
    X = np.linspace(0, 1, 5)[:, None]
    phi = [2.0]
    a = latent_sqdist(embed(codes, [levels]))
    b = latent_sqdist(embed(codes, [moved]))
    np.testing.assert_allclose(np.exp(-a), np.exp(-b), atol=1e-12)
    for i in range(4):
        for j in range(4):
            ci = mixed_corr(MixedPoint([0.3], levels[i]), MixedPoint([0.6], levels[j]), phi)
            cm = mixed_corr(MixedPoint([0.3], moved[i]), MixedPoint([0.6], moved[j]), phi)
            assert ci == pytest.approx(cm, abs=1e-12)


def test_level_table_matches_embedding():
    rng = np.random.default_rng(1)
    lat = [rng.uniform(-3, 3, (3, 2)), rng.uniform(-3, 3, (2, 2))]
    codes = np.column_stack([rng.integers(0, 3, 9), rng.integers(0, 2, 9)])
    np.testing.assert_allclose(level_sqdist(codes, lat), latent_sqdist(embed(codes, lat)), rtol=1e-14)


def test_positive_definite_distinct_points():
    rng = np.random.default_rng(2)
    pts = [MixedPoint(x, []) for x in rng.uniform(size=(40, 1))]
    f = corr_matrix(pts, [1e-2], nugget=1e-6, escalate=False)
    assert np.all(np.isfinite(f.L))
