"""Weighted-elastic voxel smoothing.

Each point is replaced by the density-weighted centroid of its "elastic
voxel": the point itself plus its ``2 * n_half`` nearest neighbours. The
density of a point is the reciprocal of the sphere volume whose radius is
the mean distance to its ``k_density`` nearest neighbours.
"""

from __future__ import annotations

import numpy as np

from gullypost.model import PointCloud, build_index, knn_excluding_self

_ROWS_PER_CHUNK = 65536


def _coords(points):
    if isinstance(points, PointCloud):
        return points.xyz
    a = np.asarray(points, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] not in (2, 3):
        raise ValueError("expected an (n, 2) or (n, 3) array")
    return a


def point_density(points, k_density: int = 6) -> np.ndarray:
    """Per-point density ``3 / (4 pi rbar^3)`` in points per cubic meter.

    Coincident points (``rbar == 0``) get the largest finite density of the
    set; if there is none, every density is 1.
    """
    xyz = _coords(points)
    if k_density < 1:
        raise ValueError("k_density must be >= 1")
    if len(xyz) <= k_density:
        raise ValueError(f"need more than {k_density} points for density, got {len(xyz)}")
    index = build_index(xyz, dims=xyz.shape[1])
    _, dist = knn_excluding_self(index, k_density)
    rbar = dist.mean(axis=1)
    with np.errstate(divide="ignore"):
        rho = 3.0 / (4.0 * np.pi * rbar**3)
    finite = np.isfinite(rho)
    if not finite.all():
        rho[~finite] = rho[finite].max() if finite.any() else 1.0
    return rho


def voxel_members(points, n_half: int, include_self: bool = True) -> np.ndarray:
    """Member indices of every elastic voxel, ascending within each row.

    With ``include_self`` a voxel holds ``2 * n_half + 1`` points (the
    point and its ``2 * n_half`` neighbours); otherwise ``2 * n_half``
    (the point and ``2 * n_half - 1`` neighbours).
    """
    xyz = _coords(points)
    n_nb = 2 * n_half if include_self else 2 * n_half - 1
    if n_half < 1 or n_nb < 1:
        raise ValueError("n_half must be >= 1")
    if len(xyz) <= n_nb:
        raise ValueError(f"need more than {n_nb} points for the voxel size, got {len(xyz)}")
    index = build_index(xyz, dims=xyz.shape[1])
    nb, _ = knn_excluding_self(index, n_nb)
    members = np.column_stack([np.arange(len(xyz)), nb])
    members.sort(axis=1)
    return members


def smooth_points(points, n_half: int = 10, k_density: int = 6, include_self: bool = True) -> np.ndarray:
    """Weighted-centroid smoothing of a bare coordinate array (2D or 3D)."""
    xyz = _coords(points)
    return weighted_centroids(xyz, voxel_members(xyz, n_half, include_self), point_density(xyz, k_density))


def weighted_centroids(xyz, members, rho) -> np.ndarray:
    """Row ``k``: sum(rho[m] * xyz[m]) / sum(rho[m]) over ``m in members[k]``."""
    xyz = np.asarray(xyz, dtype=np.float64)
    members = np.asarray(members)
    rho = np.asarray(rho, dtype=np.float64)
    out = np.empty((len(members), xyz.shape[1]))
    for a in range(0, len(members), _ROWS_PER_CHUNK):
        m = members[a : a + _ROWS_PER_CHUNK]
        w = rho[m]
        out[a : a + _ROWS_PER_CHUNK] = np.sum(w[:, :, None] * xyz[m], axis=1) / np.sum(w, axis=1)[:, None]
    return out


def smooth(cloud: PointCloud, n_half: int = 10, k_density: int = 6, include_self: bool = True) -> PointCloud:
    """Smoothed copy of ``cloud``; point ``k`` keeps the color of input point ``k``."""
    if len(cloud) <= 2 * n_half:
        raise ValueError(f"cloud too small for n_half={n_half}")
    return cloud.with_xyz(smooth_points(cloud.xyz, n_half, k_density, include_self))
