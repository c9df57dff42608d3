"""Core value types and an exact nearest-neighbour index.

Every point set is carried as a float64 ``(n, 3)`` array. Colors live in a
parallel ``uint8`` array with an explicit ``colored`` mask, so black
``(0, 0, 0)`` stays a legal color.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


class GullyError(Exception):
    """Base class for all toolkit errors."""


class ParseError(GullyError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class NumericalError(GullyError):
    """A numerical stage failed (degenerate geometry, no convergence...)."""


_WORKERS = 1


def get_workers() -> int:
    return _WORKERS


def set_workers(n: int) -> None:
    """Set the worker count used by index queries (-1 = all cores)."""
    global _WORKERS
    if n == 0 or n < -1:
        raise ValueError("workers must be positive or -1")
    _WORKERS = int(n)


@contextlib.contextmanager
def workers(n: int):
    old = _WORKERS
    set_workers(n)
    try:
        yield
    finally:
        set_workers(old)


def _frozen(a, dtype, shape_tail=()):
    a = np.array(a, dtype=dtype, copy=True)
    if shape_tail and (a.ndim != 1 + len(shape_tail) or a.shape[1:] != shape_tail):
        if a.size == 0:
            a = a.reshape((0,) + shape_tail)
        else:
            raise ValueError(f"expected shape (n, {', '.join(map(str, shape_tail))}), got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points with optional per-point color.

    ``xyz`` is ``(n, 3)`` in meters, ``rgb`` is ``(n, 3)`` uint8 and
    ``colored`` flags which rows carry a color at all.
    """

    xyz: np.ndarray
    rgb: np.ndarray = None
    colored: np.ndarray = None
    frame: str = "map"

    def __post_init__(self):
        xyz = _frozen(self.xyz, np.float64, (3,))
        n = len(xyz)
        if not np.all(np.isfinite(xyz)):
            raise ValueError("point coordinates must be finite")
        rgb = np.zeros((n, 3), np.uint8) if self.rgb is None else self.rgb
        rgb = np.asarray(rgb)
        if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
            raise ValueError("color channels must lie in [0, 255]")
        rgb = _frozen(rgb, np.uint8, (3,))
        colored = np.zeros(n, bool) if self.colored is None else self.colored
        colored = _frozen(colored, bool)
        if len(rgb) != n or len(colored) != n:
            raise ValueError("color arrays must match point count")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "colored", colored)

    def __len__(self):
        return len(self.xyz)

    def take(self, idx) -> PointCloud:
        idx = np.asarray(idx)
        return PointCloud(self.xyz[idx], self.rgb[idx], self.colored[idx], self.frame)

    def with_xyz(self, xyz) -> PointCloud:
        return PointCloud(xyz, self.rgb, self.colored, self.frame)

    def equals(self, other: PointCloud) -> bool:
        return (
            np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.colored, other.colored)
            and np.array_equal(self.rgb[self.colored], other.rgb[other.colored])
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered platform positions; ``t`` strictly increasing, seconds."""

    t: np.ndarray
    xyz: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t, np.float64)
        xyz = _frozen(self.xyz, np.float64, (3,))
        if t.ndim != 1 or len(t) != len(xyz):
            raise ValueError("t and xyz must have the same length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(xyz))):
            raise ValueError("trajectory values must be finite")
        if len(t) and t[0] < 0:
            raise ValueError("timestamps must be >= 0")
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if len(bad):
            raise ValueError(f"timestamps not strictly increasing (sample {bad[0] + 2})")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self):
        return len(self.t)

    def xy_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.xyz[:, :2], axis=0).T)))


@dataclass(frozen=True)
class ScalingFactors:
    f_h: float
    f_e: float

    def __post_init__(self):
        for name in ("f_h", "f_e"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


@dataclass(frozen=True, eq=False)
class NnIndex:
    """Exact k-nearest-neighbour index over a fixed point set.

    Results are identical to a brute-force scan: ascending distance, ties
    broken by the lower point index.
    """

    points: np.ndarray
    dims: int
    _tree: cKDTree = field(repr=False)

    def __len__(self):
        return len(self.points)


def build_index(points, dims: int = 3) -> NnIndex:
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("empty point set")
    pts = np.atleast_2d(pts)[:, :dims].copy()
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    pts.setflags(write=False)
    return NnIndex(pts, dims, cKDTree(pts))


_CHUNK_ELEMS = 2_000_000


def _exact_dist(points, idx, queries):
    diff = points[idx] - queries[:, None, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def knn(index: NnIndex, queries, k: int):
    """Batch k-NN. Returns ``(idx, dist)``, each ``(m, k)``.

    The kd-tree proposes candidates; distances are recomputed exactly and
    ordered by ``(distance, index)``. Rows whose k-th and (k+1)-th
    candidates are (near-)tied fall back to a radius query so the tie rule
    holds across the boundary.
    """
    n = len(index)
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError("k exceeds point count")
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))[:, : index.dims]
    m = len(q)
    if m == 0:
        return np.empty((0, k), np.intp), np.empty((0, k))
    chunk = max(1, _CHUNK_ELEMS // (k + 1))
    if m > chunk:
        parts = [_knn_block(index, q[i : i + chunk], k) for i in range(0, m, chunk)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    return _knn_block(index, q, k)


def _knn_block(index, q, k):
    n, m = len(index), len(q)
    kk = min(k + 1, n)
    _, cand = index._tree.query(q, k=kk, workers=_WORKERS)
    cand = np.asarray(cand, dtype=np.intp).reshape(m, kk)
    d = _exact_dist(index.points, cand, q)
    rows = np.repeat(np.arange(m), kk)
    order = np.lexsort((cand.ravel(), d.ravel(), rows)).reshape(m, kk) - (np.arange(m) * kk)[:, None]
    cand = np.take_along_axis(cand, order, axis=1)
    d = np.take_along_axis(d, order, axis=1)
    idx, dist = cand[:, :k].copy(), d[:, :k].copy()
    if kk > k:
        dk, dnext = d[:, k - 1], d[:, k]
        suspect = np.nonzero(dnext - dk <= 1e-12 * np.maximum(1.0, dnext))[0]
        for r in suspect:
            radius = d[r, k] * (1 + 1e-9) + 1e-12
            ball = np.asarray(index._tree.query_ball_point(q[r], radius), dtype=np.intp)
            bd = _exact_dist(index.points, ball[None, :], q[r : r + 1])[0]
            o = np.lexsort((ball, bd))[:k]
            idx[r], dist[r] = ball[o], bd[o]
    return idx, dist


def knn_query(index: NnIndex, query, k: int) -> list[tuple[int, float]]:
    """The ``k`` nearest points to one query as ``[(index, distance), ...]``."""
    idx, dist = knn(index, np.asarray(query, dtype=np.float64)[None, :], k)
    return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]


def knn_excluding_self(index: NnIndex, k: int):
    """k nearest *other* points for every indexed point.

    Self is dropped from a (k+1)-query; when coincident lower-index
    duplicates crowd it out, the (k+1)-th candidate is dropped instead.
    """
    n = len(index)
    if k >= n:
        raise ValueError("k exceeds point count")
    idx, dist = knn(index, index.points, k + 1)
    is_self = idx == np.arange(n)[:, None]
    has_self = is_self.any(axis=1)
    drop = np.where(has_self, np.argmax(is_self, axis=1), k)
    keep = np.ones_like(idx, dtype=bool)
    keep[np.arange(n), drop] = False
    return idx[keep].reshape(n, k), dist[keep].reshape(n, k)
