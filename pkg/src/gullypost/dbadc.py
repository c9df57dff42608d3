"""Drift correction of a SLAM map against an orthophoto and a barometer.

The horizontal scale comes from matching the trajectory against the channel
centerline extracted from the orthophoto; the vertical scale comes from the
barometric altitude change between the first and last trajectory samples.
The map is then split into units (points sharing the nearest anchor on the
smoothed, densified, flattened trajectory) and each unit is translated by
the displacement of its anchor under the scaling.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy import ndimage
from scipy.interpolate import make_lsq_spline

from gullypost.ingest import BarometerSeries, DomRaster
from gullypost.model import (
    NumericalError,
    PointCloud,
    ScalingFactors,
    Trajectory,
    build_index,
    knn,
)

log = logging.getLogger(__name__)

STANDARD_PRESSURE = 101325.0
_ISA_H = 44330.0
_ISA_EXP = 0.190295


# ---------------------------------------------------------------- types


@dataclass(frozen=True, eq=False)
class ChannelMask:
    """Boolean raster aligned with the source orthophoto; True = channel."""

    mask: np.ndarray
    origin_x: float
    origin_y: float
    cell: float

    def pixel_centers(self, rows, cols):
        return (
            self.origin_x + (np.asarray(cols) + 0.5) * self.cell,
            self.origin_y - (np.asarray(rows) + 0.5) * self.cell,
        )


@dataclass(frozen=True, eq=False)
class CenterlinePolyline:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or len(p) < 2:
            raise ValueError("centerline needs at least 2 points of (x, y)")
        if np.any(np.all(np.diff(p, axis=0) == 0, axis=1)):
            raise ValueError("consecutive centerline points must be distinct")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)

    def arc(self) -> np.ndarray:
        return _cumlen(self.points)

    def length(self) -> float:
        return float(self.arc()[-1])


@dataclass(frozen=True, eq=False)
class UnitPartition:
    """Assignment of map points to correction units.

    ``unit[i]`` is the 0-based unit of original point ``i``; ``order`` is the
    stable permutation that makes units contiguous; units occupy
    ``order[offsets[j]:offsets[j + 1]]``.
    """

    unit: np.ndarray
    order: np.ndarray
    offsets: np.ndarray
    anchors: Trajectory

    @property
    def n_units(self) -> int:
        return len(self.anchors)

    @property
    def sorted_unit(self) -> np.ndarray:
        return self.unit[self.order]

    def reorder(self, cloud: PointCloud) -> PointCloud:
        if len(cloud) != len(self.unit):
            raise ValueError("cloud does not match partition")
        return cloud.take(self.order)

    def unit_slice(self, j: int) -> slice:
        return slice(int(self.offsets[j]), int(self.offsets[j + 1]))


@dataclass(frozen=True)
class ScaleFit:
    f_h: float
    rotation: np.ndarray
    translation: np.ndarray
    converged: bool
    iterations: int
    rms: float


# ---------------------------------------------------------------- helpers


def _cumlen(p):
    seg = np.sqrt(np.sum(np.diff(p, axis=0) ** 2, axis=1))
    return np.concatenate([[0.0], np.cumsum(seg)])


def _dedupe(p):
    """Drop points that repeat their predecessor."""
    keep = np.concatenate([[True], np.any(np.diff(p, axis=0) != 0, axis=1)])
    return p[keep]


def resample_polyline(points, n: int) -> np.ndarray:
    """``n`` points equally spaced by arc length along ``points``."""
    p = _dedupe(np.asarray(points, dtype=np.float64))
    if len(p) == 1:
        return np.repeat(p, n, axis=0)
    s = _cumlen(p)
    st = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(st, s, p[:, d]) for d in range(p.shape[1])])


def _sub_polyline(p, s, a, b):
    """Piece of polyline ``p`` (arc lengths ``s``) between arc positions a < b."""
    inner = (s > a) & (s < b)
    ends = np.array([[np.interp(x, s, p[:, d]) for d in range(p.shape[1])] for x in (a, b)])
    return _dedupe(np.vstack([ends[:1], p[inner], ends[1:]]))


# ---------------------------------------------------------------- segmentation


def segment_channel(dom: DomRaster, window: int = 15, bias: float = 0.15, invert: bool = False) -> ChannelMask:
    """Adaptive (integral-image) thresholding of the orthophoto.

    A pixel is channel when it is darker than ``(1 - bias)`` times the mean
    of the ``window`` x ``window`` neighbourhood, clipped at the borders.
    With ``invert`` a pixel is channel when brighter than ``(1 + bias)``
    times that mean.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    if not 0 < bias < 1:
        raise ValueError("bias must lie in (0, 1)")
    v = dom.values.astype(np.int64)
    h, w = v.shape
    integral = np.zeros((h + 1, w + 1), np.int64)
    integral[1:, 1:] = v.cumsum(0).cumsum(1)
    r = window // 2
    rows, cols = np.arange(h), np.arange(w)
    r0, r1 = np.maximum(rows - r, 0), np.minimum(rows + r, h - 1) + 1
    c0, c1 = np.maximum(cols - r, 0), np.minimum(cols + r, w - 1) + 1
    total = (
        integral[r1][:, c1]
        - integral[r0][:, c1]
        - integral[r1][:, c0]
        + integral[r0][:, c0]
    )
    count = np.outer(r1 - r0, c1 - c0)
    mean = total / count
    if invert:
        mask = v > mean * (1.0 + bias)
    else:
        mask = v < mean * (1.0 - bias)
    return ChannelMask(mask, dom.origin_x, dom.origin_y, dom.cell)


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), int))
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def fit_centerline(mask: ChannelMask, sample_spacing: float, knot_spacing: float | None = None) -> CenterlinePolyline:
    """Fit a smooth centerline through the largest channel component.

    Pixel centers are parameterised by their projection on the first
    principal axis and each world coordinate is fitted against that
    parameter by least squares: a single cubic when ``knot_spacing`` is
    None, otherwise a cubic spline with interior knots every
    ``knot_spacing`` meters of the parameter. The fitted curve is returned
    sampled every ``sample_spacing`` meters of arc length.
    """
    if not sample_spacing > 0:
        raise ValueError("sample_spacing must be positive")
    comp = largest_component(mask.mask)
    rows, cols = np.nonzero(comp)
    if len(rows) == 0:
        raise NumericalError("no channel pixels")
    x, y = mask.pixel_centers(rows, cols)
    pts = np.column_stack([x, y])
    mean = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - mean, full_matrices=False)
    axis = vt[0]
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    tau = (pts - mean) @ axis
    lo, hi = float(tau.min()), float(tau.max())
    if hi - lo <= 0:
        raise NumericalError("channel component is a single pixel")

    order = np.argsort(tau, kind="stable")
    tau_s, pts_s = tau[order], pts[order]
    n_interior = 0 if knot_spacing is None else int((hi - lo) // knot_spacing)
    curve = None
    if n_interior > 0:
        inner = np.linspace(lo, hi, n_interior + 2)[1:-1]
        knots = np.concatenate([[lo] * 4, inner, [hi] * 4])
        try:
            curve = [make_lsq_spline(tau_s, pts_s[:, d], knots, k=3) for d in range(2)]
        except (ValueError, np.linalg.LinAlgError):
            log.warning("spline centerline fit failed, falling back to a single cubic")
            curve = None
    if curve is None:
        deg = min(3, len(np.unique(tau)) - 1)
        curve = [Polynomial.fit(tau, pts[:, d], deg) for d in range(2)]

    n_dense = int(np.ceil((hi - lo) / (sample_spacing / 8.0))) + 1
    n_dense = min(max(n_dense, 64), 2_000_000)
    grid = np.linspace(lo, hi, n_dense)
    dense = np.column_stack([curve[0](grid), curve[1](grid)])
    s = _cumlen(dense)
    stations = np.arange(0.0, s[-1], sample_spacing)
    if s[-1] - stations[-1] > 1e-9 * max(1.0, s[-1]):
        stations = np.append(stations, s[-1])
    line = np.column_stack([np.interp(stations, s, dense[:, 0]), np.interp(stations, s, dense[:, 1])])
    return CenterlinePolyline(_dedupe(line))


# ---------------------------------------------------------------- horizontal scale


def fragment_score(traj_xy, fragment_xy, n_resample: int = 256) -> float:
    """Cosine similarity of two curves after arc-length resampling and centering."""
    a = resample_polyline(traj_xy, n_resample)
    b = resample_polyline(fragment_xy, n_resample)
    a = (a - a.mean(axis=0)).T.ravel()
    b = (b - b.mean(axis=0)).T.ravel()
    den = np.linalg.norm(a) * np.linalg.norm(b)
    return 0.0 if den == 0 else float(a @ b / den)


SCALE_SWEEP = np.round(0.5 + 0.05 * np.arange(31), 12)


def best_fragment(
    trajectory: Trajectory,
    centerline: CenterlinePolyline,
    n_resample: int = 256,
    step: float | None = None,
    scales=SCALE_SWEEP,
) -> tuple[CenterlinePolyline, float]:
    """Window of the centerline most correlated with the trajectory's XY shape.

    Window lengths are ``s * L`` for the trajectory XY arc length ``L`` and
    ``s`` in ``scales``; window starts advance by ``step`` (default: the
    median centerline sample spacing). Both traversal directions of the
    centerline are tried; the returned fragment runs in the matching one.
    """
    traj = _dedupe(trajectory.xyz[:, :2])
    if len(traj) < 2:
        raise NumericalError("trajectory has no horizontal extent")
    L = float(_cumlen(traj)[-1])
    a = resample_polyline(traj, n_resample)
    a = (a - a.mean(axis=0)).T.ravel()
    na = np.linalg.norm(a)
    lin = np.linspace(0.0, 1.0, n_resample)

    best = (-np.inf, None)
    for reverse in (False, True):
        p = centerline.points[::-1] if reverse else centerline.points
        s = _cumlen(p)
        total = s[-1]
        st = float(np.median(np.diff(s))) if step is None else float(step)
        for scale in scales:
            W = scale * L
            if W > total * (1 + 1e-12):
                continue
            W = min(W, total)
            starts = np.arange(0.0, total - W + st * 1e-9, st)
            starts = starts[starts + W <= total * (1 + 1e-12)]
            if len(starts) == 0:
                continue
            stations = np.minimum(starts[:, None] + W * lin[None, :], total)
            bx = np.interp(stations, s, p[:, 0])
            by = np.interp(stations, s, p[:, 1])
            bx -= bx.mean(axis=1, keepdims=True)
            by -= by.mean(axis=1, keepdims=True)
            dot = bx @ a[:n_resample] + by @ a[n_resample:]
            nb = np.sqrt(np.sum(bx * bx, axis=1) + np.sum(by * by, axis=1))
            den = na * nb
            score = np.divide(dot, den, out=np.zeros_like(dot), where=den > 0)
            i = int(np.argmax(score))
            if score[i] > best[0]:
                best = (float(score[i]), (reverse, float(starts[i]), W))
    if best[1] is None:
        raise NumericalError("centerline too short")
    reverse, start, W = best[1]
    p = centerline.points[::-1] if reverse else centerline.points
    s = _cumlen(p)
    frag = _sub_polyline(p, s, start, min(start + W, s[-1]))
    return CenterlinePolyline(frag), best[0]


def _nearest_on_polyline(poly, index, pts):
    """Closest points on polyline segments (checks segments around 4 nearest vertices)."""
    k = min(4, len(poly))
    vid, _ = knn(index, pts, k)
    best_d = np.full(len(pts), np.inf)
    best_q = np.empty_like(pts)
    nseg = len(poly) - 1
    for col in range(k):
        v = vid[:, col]
        for seg in (v - 1, v):
            ok = (seg >= 0) & (seg < nseg)
            sg = np.clip(seg, 0, nseg - 1)
            a, b = poly[sg], poly[sg + 1]
            ab = b - a
            t = np.sum((pts - a) * ab, axis=1) / np.sum(ab * ab, axis=1)
            q = a + np.clip(t, 0.0, 1.0)[:, None] * ab
            d = np.sum((pts - q) ** 2, axis=1)
            better = ok & (d < best_d)
            best_d[better] = d[better]
            best_q[better] = q[better]
    return best_q


def _rotation_2d(P, Q):
    """Rotation R minimising sum |R p - q|^2 over centred pairs (proper, det +1)."""
    H = P.T @ Q
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    return Vt.T @ np.diag([1.0, d]) @ U.T


def fit_scale(
    trajectory: Trajectory,
    fragment: CenterlinePolyline,
    max_iter: int = 50,
    tol: float = 1e-6,
    n_points: int = 512,
) -> ScaleFit:
    """Similarity ICP between the trajectory XY and a centerline fragment.

    Alternates a rigid fit at fixed scale with the closed-form scale update
    ``s = sum(<R p, q>) / sum(|p|^2)`` over centred nearest-point pairs.
    The trajectory is resampled to ``n_points`` equal arc-length samples so
    dwell periods do not dominate the fit. Scale starts at the arc length
    ratio; rotation starts from the index correspondence of both curves
    resampled by arc length.
    """
    traj = _dedupe(trajectory.xyz[:, :2])
    if len(traj) < 2:
        raise NumericalError("trajectory has no horizontal extent")
    L = float(_cumlen(traj)[-1])
    frag = fragment.points
    P = resample_polyline(traj, n_points)
    P = P - P.mean(axis=0)
    F0 = resample_polyline(frag, n_points)
    c = F0.mean(axis=0)
    R = _rotation_2d(P, F0 - c)
    s = fragment.length() / L
    pp = float(np.sum(P * P))
    if pp == 0:
        raise NumericalError("degenerate trajectory")
    index = build_index(frag, dims=2)

    best = (np.inf, s, R, c)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        X = s * P @ R.T + c
        Q = _nearest_on_polyline(frag, index, X)
        qbar = Q.mean(axis=0)
        Qc = Q - qbar
        R = _rotation_2d(P, Qc)
        c = qbar
        RP = P @ R.T
        s_new = float(np.sum(RP * Qc) / pp)
        rms = float(np.sqrt(np.mean(np.sum((s_new * RP + c - Q) ** 2, axis=1))))
        if rms < best[0]:
            best = (rms, s_new, R, c)
        done = abs(s_new - s) < tol
        s = s_new
        if done:
            converged = True
            break
    if converged:
        X = s * P @ R.T + c
        Q = _nearest_on_polyline(frag, index, X)
        rms = float(np.sqrt(np.mean(np.sum((X - Q) ** 2, axis=1))))
        return ScaleFit(s, R, c, True, it, rms)
    rms, s, R, c = best
    return ScaleFit(s, R, c, False, it, rms)


def estimate_fh(trajectory: Trajectory, fragment: CenterlinePolyline, **kw) -> float:
    fit = fit_scale(trajectory, fragment, **kw)
    if not fit.converged:
        warnings.warn(f"scale ICP did not converge after {fit.iterations} iterations", RuntimeWarning)
    return fit.f_h


# ---------------------------------------------------------------- vertical scale


def pressure_to_altitude(pressure, p0: float = STANDARD_PRESSURE):
    """Standard-atmosphere altitude (m) of ``pressure`` relative to ``p0``."""
    p = np.asarray(pressure, dtype=np.float64)
    if np.any(~(p > 0)) or not p0 > 0:
        raise ValueError("pressures must be positive")
    h = _ISA_H * (1.0 - (p / p0) ** _ISA_EXP)
    return float(h) if h.ndim == 0 else h


def altitude_to_pressure(altitude, p0: float = STANDARD_PRESSURE):
    """Inverse of :func:`pressure_to_altitude`."""
    h = np.asarray(altitude, dtype=np.float64)
    p = p0 * (1.0 - h / _ISA_H) ** (1.0 / _ISA_EXP)
    return float(p) if p.ndim == 0 else p


def _baro_altitude_at(baro, t, p0, window, side):
    if window > 0:
        if side == "start":
            sel = (baro.t >= t) & (baro.t <= t + window)
        else:
            sel = (baro.t >= t - window) & (baro.t <= t)
        if np.any(sel):
            return float(np.mean(pressure_to_altitude(baro.pressure[sel], p0)))
    i = int(np.searchsorted(baro.t, t))
    cand = [j for j in (i - 1, i) if 0 <= j < len(baro)]
    j = min(cand, key=lambda j: (abs(baro.t[j] - t), j))
    return pressure_to_altitude(baro.pressure[j], p0)


def estimate_fe(
    trajectory: Trajectory,
    baro: BarometerSeries,
    p0: float = STANDARD_PRESSURE,
    window: float = 0.0,
) -> float:
    """Ratio of the barometric elevation change to the trajectory's.

    Barometric altitude at each end is taken from the sample nearest in
    time, or, with ``window > 0``, averaged over the first/last ``window``
    seconds of the trajectory.
    """
    if len(trajectory) < 2 or len(baro) == 0:
        raise ValueError("need >= 2 trajectory samples and a barometer series")
    t0, t1 = float(trajectory.t[0]), float(trajectory.t[-1])
    if baro.t[-1] < t0 or baro.t[0] > t1:
        raise ValueError("barometer and trajectory do not overlap in time")
    dz = float(trajectory.xyz[-1, 2] - trajectory.xyz[0, 2])
    if abs(dz) < 1e-6:
        raise NumericalError("flat trajectory, f_e undefined")
    le = _baro_altitude_at(baro, t1, p0, window, "end") - _baro_altitude_at(baro, t0, p0, window, "start")
    return le / dz


# ---------------------------------------------------------------- trajectory ops


def _moving_average(v, window):
    """Centered moving average with point-symmetric (odd) end reflection."""
    n = len(v)
    half = min(window // 2, n - 1)
    if half <= 0:
        return v.copy()
    ref = v[0]
    d = v - ref  # offsets keep constant input exactly constant
    head = 2 * d[0] - d[half:0:-1]
    tail = 2 * d[-1] - d[-2 : -half - 2 : -1]
    padded = np.concatenate([head, d, tail])
    w = 2 * half + 1
    return np.convolve(padded, np.ones(w), mode="valid") / w + ref


def smooth_densify_trajectory(trajectory: Trajectory, window: int = 11, spacing: float = 0.5) -> Trajectory:
    """Zero-phase moving average, then linear densification to <= ``spacing``."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if len(trajectory) < 2:
        raise ValueError("need at least 2 trajectory samples")
    xyz = np.column_stack([_moving_average(trajectory.xyz[:, d], window) for d in range(3)])
    t = trajectory.t
    seg = np.sqrt(np.sum(np.diff(xyz, axis=0) ** 2, axis=1))
    m = np.maximum(np.ceil(seg / spacing).astype(np.int64), 1)
    # fractional positions along each source segment
    seg_id = np.repeat(np.arange(len(seg)), m)
    frac = (np.arange(int(m.sum())) - np.repeat(np.cumsum(m) - m, m)) / np.repeat(m, m)
    out_xyz = xyz[seg_id] + frac[:, None] * (xyz[seg_id + 1] - xyz[seg_id])
    out_t = t[seg_id] + frac * (t[seg_id + 1] - t[seg_id])
    out_xyz = np.vstack([out_xyz, xyz[-1:]])
    out_t = np.append(out_t, t[-1])
    return Trajectory(out_t, out_xyz)


def project_horizontal(trajectory: Trajectory) -> Trajectory:
    xyz = trajectory.xyz.copy()
    xyz[:, 2] = 0.0
    return Trajectory(trajectory.t, xyz)


def scale_trajectory(trajectory: Trajectory, f: ScalingFactors) -> Trajectory:
    return Trajectory(trajectory.t, trajectory.xyz * np.array([f.f_h, f.f_h, f.f_e]))


def partition_units(cloud: PointCloud, anchors: Trajectory) -> UnitPartition:
    """Assign each point to its nearest anchor (ties to the lower anchor)."""
    if len(cloud) == 0 or len(anchors) == 0:
        raise ValueError("empty map or trajectory")
    if np.any(anchors.xyz[:, 2] != 0):
        raise ValueError("anchor trajectory must be horizontal (z = 0)")
    index = build_index(anchors.xyz, dims=2)
    unit, _ = knn(index, cloud.xyz, 1)
    unit = unit[:, 0]
    order = np.argsort(unit, kind="stable")
    offsets = np.concatenate([[0], np.cumsum(np.bincount(unit, minlength=len(anchors)))])
    return UnitPartition(unit, order, offsets, anchors)


def correct_map(
    cloud: PointCloud,
    partition: UnitPartition,
    t1: Trajectory,
    t1_scaled: Trajectory,
    sign: int = 1,
) -> PointCloud:
    """Translate every unit by ``sign * (t1_scaled[j] - t1[j])``.

    ``cloud`` must already be reordered by ``partition`` (see
    :meth:`UnitPartition.reorder`).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if len(t1) != len(t1_scaled) or len(t1) != partition.n_units:
        raise ValueError("trajectory lengths do not match the unit count")
    if len(cloud) != len(partition.unit):
        raise ValueError("cloud does not match partition")
    shift = t1_scaled.xyz - t1.xyz
    if sign < 0:
        shift = -shift
    return cloud.with_xyz(cloud.xyz + shift[partition.sorted_unit])


# ---------------------------------------------------------------- full stage


@dataclass(frozen=True, eq=False)
class DriftCorrection:
    factors: ScalingFactors
    scale_fit: ScaleFit
    mask: ChannelMask
    centerline: CenterlinePolyline
    fragment: CenterlinePolyline
    fragment_score: float
    t1: Trajectory  # smoothed, densified
    t2: Trajectory  # ... and flattened; unit anchors
    partition: UnitPartition
    trajectory_scaled: Trajectory
    t1_scaled: Trajectory
    t2_scaled: Trajectory
    corrected: PointCloud  # reordered by partition


def correct_drift(
    cloud: PointCloud,
    trajectory: Trajectory,
    dom: DomRaster,
    baro: BarometerSeries,
    *,
    p0: float = STANDARD_PRESSURE,
    baro_window: float = 0.0,
    segment_window: int = 15,
    segment_bias: float = 0.15,
    invert: bool = False,
    centerline_spacing: float = 1.0,
    knot_spacing: float | None = None,
    n_resample: int = 256,
    icp_max_iter: int = 50,
    icp_tol: float = 1e-6,
    smooth_window: int = 11,
    densify_spacing: float = 0.5,
    sign: int = 1,
    factors: ScalingFactors | None = None,
) -> DriftCorrection:
    """Run the whole correction: factors, units, translated map.

    Passing ``factors`` skips estimation (the DOM stages still run so the
    result carries the centerline for reporting).
    """
    mask = segment_channel(dom, segment_window, segment_bias, invert)
    centerline = fit_centerline(mask, centerline_spacing, knot_spacing)
    fragment, score = best_fragment(trajectory, centerline, n_resample, step=centerline_spacing)
    fit = fit_scale(trajectory, fragment, max_iter=icp_max_iter, tol=icp_tol)
    if factors is None:
        f_e = estimate_fe(trajectory, baro, p0, baro_window)
        factors = ScalingFactors(fit.f_h, f_e)
    log.info("f_h=%.6f f_e=%.6f (fragment score %.4f)", factors.f_h, factors.f_e, score)
    t1 = smooth_densify_trajectory(trajectory, smooth_window, densify_spacing)
    t2 = project_horizontal(t1)
    partition = partition_units(cloud, t2)
    t1s = scale_trajectory(t1, factors)
    corrected = correct_map(partition.reorder(cloud), partition, t1, t1s, sign)
    return DriftCorrection(
        factors=factors,
        scale_fit=fit,
        mask=mask,
        centerline=centerline,
        fragment=fragment,
        fragment_score=score,
        t1=t1,
        t2=t2,
        partition=partition,
        trajectory_scaled=scale_trajectory(trajectory, factors),
        t1_scaled=t1s,
        t2_scaled=scale_trajectory(t2, factors),
        corrected=corrected,
    )
