import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gullypost.model import PointCloud
from gullypost.wevg import point_density, smooth, smooth_points, voxel_members, weighted_centroids
from oracles import density_brute, wevg_brute


def test_density_unit_radius():
    # 7 points: origin plus 6 axis neighbours at distance 1; the centre has rbar = 1
    pts = np.array([(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)], float)
    rho = point_density(pts, 6)
    assert rho[0] == pytest.approx(3 / (4 * np.pi), rel=1e-15)
    assert rho[0] == pytest.approx(0.2387324, abs=1e-7)


def test_density_scaling_law():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(100, 3))
    np.testing.assert_allclose(point_density(2 * pts, 6), point_density(pts, 6) / 8, rtol=1e-13)


def test_density_matches_brute_force():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(300, 3))
    np.testing.assert_allclose(point_density(pts, 6), density_brute(pts, 6), rtol=1e-12, atol=0)


def test_density_duplicates_clamped():
    pts = np.vstack([np.zeros((8, 3)), np.random.default_rng(2).uniform(1, 2, (20, 3))])
    rho = point_density(pts, 6)
    assert np.all(np.isfinite(rho))
    assert np.all(rho[:8] == rho[8:].max())
    assert np.all(point_density(np.zeros((5, 3)), 2) == 1.0)


def test_density_too_small():
    with pytest.raises(ValueError):
        point_density(np.zeros((6, 3)), 6)


def test_smooth_identical_points():
    c = PointCloud(np.tile([1.5, -2.0, 7.0], (30, 1)))
    assert np.array_equal(smooth(c, 10, 6).xyz, c.xyz)


def test_weighted_centroid_by_hand():
    xyz = np.array([[0.0, 0, 0], [4.0, 0, 0]])
    out = weighted_centroids(xyz, [[0, 1]], [1.0, 3.0])
    assert out[0, 0] == 3.0


def test_smooth_matches_brute_force_500():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 10, (500, 3))
    got = smooth(PointCloud(pts), 10, 6).xyz
    want = wevg_brute(pts, 10, 6)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_smooth_2d_matches_brute_force():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(200, 2))
    np.testing.assert_allclose(smooth_points(pts, 5, 4), wevg_brute(pts, 5, 4), rtol=0, atol=1e-12)


def test_voxel_size_options():
    pts = np.random.default_rng(5).normal(size=(50, 3))
    assert voxel_members(pts, 3).shape == (50, 7)
    assert voxel_members(pts, 3, include_self=False).shape == (50, 6)
    m = voxel_members(pts, 3)
    assert all(i in row for i, row in enumerate(m))
    assert np.all(np.diff(m, axis=1) > 0)


def test_smooth_keeps_colors_and_count():
    rng = np.random.default_rng(6)
    c = PointCloud(rng.normal(size=(80, 3)), rng.integers(0, 256, (80, 3)), rng.random(80) < 0.5)
    out = smooth(c, 4, 6)
    assert len(out) == len(c)
    assert np.array_equal(out.rgb, c.rgb) and np.array_equal(out.colored, c.colored)


def test_smooth_too_small():
    with pytest.raises(ValueError):
        smooth(PointCloud(np.zeros((20, 3))), 10, 6)


def test_uniform_density_is_plain_mean():
    # a regular lattice with periodic-like interior: take points whose rho equal
    g = np.array([(x, y, 0.0) for x in range(12) for y in range(12)])
    rho = point_density(g, 4)
    members = voxel_members(g, 2)
    out = smooth_points(g, 2, 4)
    for k in range(len(g)):
        if np.all(rho[members[k]] == rho[members[k][0]]):
            np.testing.assert_allclose(out[k], g[members[k]].mean(axis=0), rtol=0, atol=1e-12)


_cloud = arrays(np.float64, st.tuples(st.integers(12, 40), st.just(3)),
                elements=st.floats(-50, 50, allow_nan=False), unique=False)


@settings(max_examples=30, deadline=None)
@given(_cloud, st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)))
def test_translation_equivariance(pts, v):
    # dyadic points and shifts keep distances exact under translation
    pts = np.round(pts * 4) / 4
    v = np.round(np.array(v) * 4) / 4
    a = smooth_points(pts, 2, 3)
    b = smooth_points(pts + v, 2, 3)
    np.testing.assert_allclose(b, a + v, rtol=0, atol=1e-9 * (1 + np.abs(v).max()))


@settings(max_examples=30, deadline=None)
@given(_cloud)
def test_cardinality_and_hull(pts):
    out = smooth_points(pts, 2, 3)
    assert out.shape == pts.shape
    m = voxel_members(pts, 2)
    lo = pts[m].min(axis=1) - 1e-9
    hi = pts[m].max(axis=1) + 1e-9
    assert np.all((out >= lo) & (out <= hi))


def test_permutation_equivariance():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(120, 3))
    perm = rng.permutation(120)
    a = smooth_points(pts, 3, 4)
    b = smooth_points(pts[perm], 3, 4)
    np.testing.assert_allclose(b, a[perm], rtol=0, atol=1e-12)
