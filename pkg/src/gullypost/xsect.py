"""Channel cross-sections: fuse neighbouring units, project them onto the
section plane, and rebuild an ordered, gap-free 2D profile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from shapely.geometry import LinearRing

from gullypost.dbadc import UnitPartition
from gullypost.model import NumericalError, ParseError, PointCloud, Trajectory
from gullypost.wevg import smooth_points

GROUND = 0
WALL = 1
LABEL_NAMES = {GROUND: "ground", WALL: "wall"}
_LABEL_CODES = {v: k for k, v in LABEL_NAMES.items()}


@dataclass(frozen=True, eq=False)
class SectionPlane:
    """Vertical plane through ``origin`` with (unnormalised) ``normal``."""

    origin: np.ndarray
    normal: np.ndarray
    a: int = 0

    def __post_init__(self):
        o = np.array(self.origin, dtype=np.float64).reshape(3)
        n = np.array(self.normal, dtype=np.float64).reshape(3)
        if not np.linalg.norm(n) > 0:
            raise ValueError("section normal must be non-zero")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "normal", n)

    @property
    def axis(self) -> np.ndarray:
        """Unit in-plane horizontal axis ``(-n_y, n_x, 0) / |(n_x, n_y)|``."""
        nh = np.hypot(self.normal[0], self.normal[1])
        if nh == 0:
            raise NumericalError("degenerate section plane")
        return np.array([-self.normal[1], self.normal[0], 0.0]) / nh


@dataclass(frozen=True, eq=False)
class CrossSection:
    plane: SectionPlane
    wh: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        wh = np.array(self.wh, dtype=np.float64).reshape(-1, 2)
        lab = np.array(self.labels, dtype=np.int8).reshape(-1)
        if len(wh) != len(lab):
            raise ValueError("one label per sample required")
        object.__setattr__(self, "wh", wh)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return len(self.wh)


def fuse_units(partition: UnitPartition, cloud: PointCloud, j: int, a: int) -> PointCloud:
    """Units ``j - a .. j + a`` of a partition-ordered cloud, in unit order."""
    if a < 0 or j - a < 0 or j + a >= partition.n_units:
        raise ValueError("section window exceeds trajectory")
    if len(cloud) != len(partition.unit):
        raise ValueError("cloud does not match partition")
    return cloud.take(np.arange(partition.offsets[j - a], partition.offsets[j + a + 1]))


def project_section(points, t_minus, t_mid, t_plus, squared: bool = True):
    """Slide every point along ``d = t_plus - t_minus`` onto the plane
    through ``t_mid`` with normal ``d``.

    With ``squared=False`` the step is divided by ``|d|`` instead of
    ``|d|^2``, which only lands on the plane when ``|d| = 1``.
    """
    d = np.asarray(t_plus, dtype=np.float64) - np.asarray(t_minus, dtype=np.float64)
    dd = float(d @ d)
    if dd == 0:
        raise ValueError("zero section normal")
    xyz = points.xyz if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    alpha = (xyz - np.asarray(t_mid, dtype=np.float64)) @ d
    alpha /= dd if squared else np.sqrt(dd)
    out = xyz - alpha[:, None] * d
    if isinstance(points, PointCloud):
        return points.with_xyz(out)
    return out


def to_plane_coords(points, plane: SectionPlane) -> np.ndarray:
    xyz = points.xyz if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    u = plane.axis
    rel = xyz - plane.origin
    return np.column_stack([rel @ u, rel[:, 2]])


def from_plane_coords(wh, plane: SectionPlane) -> np.ndarray:
    wh = np.asarray(wh, dtype=np.float64)
    return plane.origin + wh[:, :1] * plane.axis + np.outer(wh[:, 1], [0.0, 0.0, 1.0])


def classify_wall_ground(wh, slope_threshold: float = 1.0, window: int = 5) -> np.ndarray:
    """WALL where the local |dh/dw| exceeds ``slope_threshold``, else GROUND.

    Samples are sorted by ``w``; the slope at each sample is the
    least-squares slope over a ``window``-sample run around it (shifted
    inward at the ends). Labels are returned in input order.
    """
    wh = np.asarray(wh, dtype=np.float64)
    n = len(wh)
    if n < 2:
        raise ValueError("need at least 2 samples")
    order = np.argsort(wh[:, 0], kind="stable")
    w, h = wh[order, 0], wh[order, 1]
    win = min(window, n)
    W = sliding_window_view(w, win)
    H = sliding_window_view(h, win)
    dw = W - W.mean(axis=1, keepdims=True)
    dh = H - H.mean(axis=1, keepdims=True)
    var = np.sum(dw * dw, axis=1)
    cov = np.sum(dw * dh, axis=1)
    hvar = np.sum(dh * dh, axis=1)
    eps = (1e-12 * (np.max(np.abs(w)) + 1.0)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(var > eps, np.abs(cov) / np.where(var > eps, var, 1.0), np.where(hvar > eps, np.inf, 0.0))
    widx = np.clip(np.arange(n) - win // 2, 0, n - win)
    lab_sorted = np.where(slope[widx] > slope_threshold, WALL, GROUND).astype(np.int8)
    labels = np.empty(n, np.int8)
    labels[order] = lab_sorted
    return labels


def _runs(labels):
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [len(labels)]])
    return list(zip(starts, ends))


def order_profile(wh, labels) -> np.ndarray:
    """Traversal order of a labelled section.

    In ``w`` order the samples fall into runs of equal label. Ground runs
    are walked by increasing ``w``; wall runs left of all ground by
    decreasing ``h``, right of all ground by increasing ``h``, and between
    two ground runs towards the higher one. Without ground, the profile is
    split at its lowest sample into a descending and an ascending wall.
    """
    wh = np.asarray(wh, dtype=np.float64)
    labels = np.asarray(labels)
    by_w = np.lexsort((wh[:, 1], wh[:, 0]))
    lab = labels[by_w]
    runs = _runs(lab)
    ground = [i for i, (a, _) in enumerate(runs) if lab[a] == GROUND]

    def by_h(idx, descending):
        key = -wh[idx, 1] if descending else wh[idx, 1]
        return idx[np.lexsort((wh[idx, 0], key))]

    if not ground:
        m = int(np.argmin(wh[by_w, 1]))
        return np.concatenate([by_h(by_w[: m + 1], True), by_h(by_w[m + 1 :], False)])
    parts = []
    first, last = ground[0], ground[-1]
    for r, (a, b) in enumerate(runs):
        idx = by_w[a:b]
        if lab[a] == GROUND:
            parts.append(idx)
        elif r < first:
            parts.append(by_h(idx, True))
        elif r > last:
            parts.append(by_h(idx, False))
        else:
            prev_h = wh[by_w[a - 1], 1]
            next_h = wh[by_w[b], 1]
            parts.append(by_h(idx, descending=next_h < prev_h))
    return np.concatenate(parts)


def densify_polyline(p, spacing: float, labels=None):
    """Insert points linearly so consecutive gaps are <= ``spacing``.

    Inserted points take the label of their segment's start sample.
    """
    p = np.asarray(p, dtype=np.float64)
    if len(p) < 2:
        return p.copy(), None if labels is None else np.asarray(labels).copy()
    seg = np.sqrt(np.sum(np.diff(p, axis=0) ** 2, axis=1))
    m = np.maximum(np.ceil(seg / spacing).astype(np.int64), 1)
    sid = np.repeat(np.arange(len(seg)), m)
    frac = (np.arange(int(m.sum())) - np.repeat(np.cumsum(m) - m, m)) / np.repeat(m, m)
    out = np.vstack([p[sid] + frac[:, None] * (p[sid + 1] - p[sid]), p[-1:]])
    if labels is None:
        return out, None
    labels = np.asarray(labels)
    return out, np.append(labels[sid], labels[-1])


def reconstruct(
    section: CrossSection,
    n_half: int = 10,
    spacing: float = 0.05,
    k_density: int = 6,
) -> CrossSection:
    """Smooth the section in its 2D chart, order it, and densify it."""
    if len(section) < 2 * n_half + 1 or len(section) <= k_density:
        raise ValueError(f"too few samples ({len(section)}) for n_half={n_half}")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    sm = smooth_points(section.wh, n_half, k_density)
    order = order_profile(sm, section.labels)
    wh, labels = densify_polyline(sm[order], spacing, section.labels[order])
    return CrossSection(section.plane, wh, labels)


def shoelace(poly) -> float:
    """Signed area of a closed polygon given as an (n, 2) vertex array."""
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _closed_vertices(poly):
    p = np.asarray(poly, dtype=np.float64)
    keep = np.concatenate([[True], np.any(np.diff(p, axis=0) != 0, axis=1)])
    p = p[keep]
    while len(p) > 1 and np.array_equal(p[0], p[-1]):
        p = p[:-1]
    return p


def check_simple(poly) -> np.ndarray:
    """Return the cleaned vertex ring, raising if it self-intersects."""
    p = _closed_vertices(poly)
    if len(p) < 3:
        raise NumericalError("polygon needs at least 3 distinct vertices")
    if not LinearRing(p).is_simple:
        raise NumericalError("self-intersecting polygon")
    return p


def _clip_below(poly, cap):
    """Sutherland-Hodgman clip of a polygon to the half-plane h <= cap."""
    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        cin, nin = cur[1] <= cap, nxt[1] <= cap
        if cin:
            out.append(cur)
        if cin != nin:
            t = (cap - cur[1]) / (nxt[1] - cur[1])
            out.append(np.array([cur[0] + t * (nxt[0] - cur[0]), cap]))
    return np.array(out) if out else np.empty((0, 2))


def section_area(section: CrossSection, cap_elevation: float) -> float:
    """Area between the profile and a horizontal cap at ``cap_elevation``.

    The profile is closed along the cap (raised to the profile's top if
    walls overshoot it) and the result is clipped to ``h <= cap``.
    """
    wh = section.wh
    if len(wh) < 2:
        raise ValueError("section needs at least 2 samples")
    ground = section.labels == GROUND
    if np.any(ground) and cap_elevation < wh[ground, 1].max():
        raise ValueError("cap elevation below the channel floor")
    top = max(cap_elevation, float(wh[:, 1].max()))
    ring = np.vstack([wh, [[wh[-1, 0], top], [wh[0, 0], top]]])
    ring = check_simple(ring)
    if top > cap_elevation:
        ring = _clip_below(ring, cap_elevation)
        if len(ring) < 3:
            return 0.0
    return abs(shoelace(ring))


def trim_below(section: CrossSection, cap_elevation: float) -> CrossSection:
    """Part of the profile around its lowest sample that lies at or below the cap.

    Both ends are cut where the profile first rises through the cap
    (interpolated), which drops bank-top ground outside the channel.
    """
    wh, lab = section.wh, section.labels
    i0 = int(np.argmin(wh[:, 1]))
    if wh[i0, 1] > cap_elevation:
        raise ValueError("cap elevation below the profile")
    above = wh[:, 1] > cap_elevation
    left = np.flatnonzero(above[:i0])
    right = np.flatnonzero(above[i0:]) + i0
    lo = left[-1] + 1 if len(left) else 0
    hi = right[0] if len(right) else len(wh)
    pts, labs = [wh[lo:hi]], [lab[lo:hi]]

    def cross(a, b):
        t = (cap_elevation - wh[a, 1]) / (wh[b, 1] - wh[a, 1])
        return (wh[a] + t * (wh[b] - wh[a]))[None, :]

    if len(left):
        pts.insert(0, cross(lo, lo - 1))
        labs.insert(0, lab[lo - 1 : lo])
    if len(right):
        pts.append(cross(hi - 1, hi))
        labs.append(lab[hi : hi + 1])
    return CrossSection(section.plane, np.vstack(pts), np.concatenate(labs))


def extract_section(
    cloud: PointCloud,
    partition: UnitPartition,
    anchors: Trajectory,
    j: int,
    a: int = 2,
    slope_threshold: float = 1.0,
    squared: bool = True,
) -> CrossSection:
    """Raw labelled section at unit ``j`` of a partition-ordered cloud.

    ``anchors`` are the (corrected) flattened unit anchors; the plane passes
    through anchor ``j`` with normal ``anchors[j + a] - anchors[j - a]``.
    """
    fused = fuse_units(partition, cloud, j, a)
    tm, t0, tp = anchors.xyz[j - a], anchors.xyz[j], anchors.xyz[j + a]
    if np.array_equal(tm, tp):
        raise NumericalError("degenerate section plane")
    plane = SectionPlane(t0, tp - tm, a)
    if len(fused) == 0:
        return CrossSection(plane, np.empty((0, 2)), np.empty(0))
    wh = to_plane_coords(project_section(fused.xyz, tm, t0, tp, squared), plane)
    labels = classify_wall_ground(wh, slope_threshold) if len(wh) >= 2 else np.zeros(len(wh))
    return CrossSection(plane, wh, labels)


def write_section_csv(section: CrossSection, path) -> None:
    o, n = section.plane.origin, section.plane.normal
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(
            "# origin {!r} {!r} {!r} normal {!r} {!r} {!r} a {}\n".format(
                *map(float, o), *map(float, n), section.plane.a
            )
        )
        fh.write("w,h,label\n")
        for (w, h), lab in zip(section.wh, section.labels):
            fh.write(f"{w:.17g},{h:.17g},{LABEL_NAMES[int(lab)]}\n")


def read_section_csv(path) -> CrossSection:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise ParseError("missing plane header", path, 1)
    tok = lines[0][1:].split()
    try:
        if tok[0] != "origin" or tok[4] != "normal" or tok[8] != "a":
            raise ValueError
        origin = [float(v) for v in tok[1:4]]
        normal = [float(v) for v in tok[5:8]]
        a = int(tok[9])
    except (ValueError, IndexError):
        raise ParseError("bad plane header", path, 1) from None
    if lines[1].strip() != "w,h,label":
        raise ParseError("expected 'w,h,label' column header", path, 2)
    wh, labels = [], []
    for i, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 3 or parts[2] not in _LABEL_CODES:
            raise ParseError(f"bad section row {raw!r}", path, i)
        try:
            w, h = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"bad number in {raw!r}", path, i) from None
        if not (np.isfinite(w) and np.isfinite(h)):
            raise ParseError("non-finite value", path, i)
        wh.append((w, h))
        labels.append(_LABEL_CODES[parts[2]])
    return CrossSection(SectionPlane(origin, normal, a), np.array(wh).reshape(-1, 2), labels)
