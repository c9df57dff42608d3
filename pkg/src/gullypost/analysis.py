"""Map products: color completion, DEM rasterization, deposit volumes and
DEM differencing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gullypost.ingest import DEFAULT_NODATA, DemGrid
from gullypost.model import PointCloud, build_index, knn
from gullypost.xsect import check_simple, shoelace


def recolor(cloud: PointCloud, k: int = 5, radius: float = 0.3) -> PointCloud:
    """Fill in uncolored points from colored neighbours, drop the rest.

    Each uncolored point takes the inverse-distance weighted mean color of
    up to ``k`` colored points within ``radius``; uncolored points with no
    colored point in range are removed. Colored points pass unchanged.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    ref = np.flatnonzero(cloud.colored)
    if len(ref) == 0:
        raise ValueError("nothing to reference")
    todo = np.flatnonzero(~cloud.colored)
    if len(todo) == 0:
        return cloud
    index = build_index(cloud.xyz[ref], dims=3)
    nb, dist = knn(index, cloud.xyz[todo], min(k, len(ref)))
    near = dist <= radius
    w = np.where(near, 1.0 / np.maximum(dist, 1e-6), 0.0)
    wsum = w.sum(axis=1)
    found = wsum > 0
    ref_rgb = cloud.rgb[ref].astype(np.float64)
    mix = np.einsum("ij,ijc->ic", w[found], ref_rgb[nb[found]]) / wsum[found, None]
    rgb = cloud.rgb.copy()
    colored = cloud.colored.copy()
    filled = todo[found]
    rgb[filled] = np.clip(np.floor(mix + 0.5), 0, 255).astype(np.uint8)
    colored[filled] = True
    keep = colored
    return PointCloud(cloud.xyz[keep], rgb[keep], colored[keep], cloud.frame)


def rasterize_dem(cloud: PointCloud, cellsize: float = 0.1, quantum: float = 0.1, nodata: float = DEFAULT_NODATA) -> DemGrid:
    """Lowest elevation per cell, rounded to ``quantum``.

    Bounds are the XY bounding box snapped outward to multiples of
    ``cellsize``; row 0 is the northern row. Empty cells are nodata.
    """
    if len(cloud) == 0:
        raise ValueError("empty map")
    if not (cellsize > 0 and quantum > 0):
        raise ValueError("cellsize and quantum must be positive")
    x, y, z = cloud.xyz.T
    xmin = np.floor(x.min() / cellsize) * cellsize
    ymax = np.ceil(y.max() / cellsize) * cellsize
    ncols = max(1, int(np.ceil((x.max() - xmin) / cellsize)))
    nrows = max(1, int(np.ceil((ymax - y.min()) / cellsize)))
    col = np.clip(np.floor((x - xmin) / cellsize).astype(np.int64), 0, ncols - 1)
    row = np.clip(np.floor((ymax - y) / cellsize).astype(np.int64), 0, nrows - 1)
    flat = np.full(nrows * ncols, np.inf)
    np.minimum.at(flat, row * ncols + col, z)
    grid = flat.reshape(nrows, ncols)
    grid = np.where(np.isfinite(grid), np.floor(grid / quantum + 0.5) * quantum, np.nan)  # ties round up
    return DemGrid(grid, float(xmin), float(ymax - nrows * cellsize), float(cellsize), nodata)


def polygon_area(poly) -> float:
    """Area of a simple polygon; raises on self-intersection."""
    return abs(shoelace(check_simple(poly)))


def prism_volume(base, length: float) -> float:
    if not length > 0:
        raise ValueError("length must be positive")
    return polygon_area(base) * length


def deposit_volume_sections(areas, spacing: float) -> float:
    """Trapezoidal integration of section areas at equally spaced stations."""
    a = np.asarray(areas, dtype=np.float64)
    if len(a) < 2:
        raise ValueError("need at least 2 stations")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if np.any(a < 0):
        raise ValueError("negative section area")
    return float(spacing * np.sum((a[:-1] + a[1:]) / 2.0))


@dataclass
class VolumeReport:
    method: str
    components: list[tuple[str, float]] = field(default_factory=list)
    volume: float | None = None

    def __post_init__(self):
        if self.method not in ("prism", "section-integration", "dem-diff"):
            raise ValueError(f"unknown volume method {self.method!r}")
        if self.volume is None:
            self.volume = float(sum(v for _, v in self.components))

    def to_text(self) -> str:
        lines = [f"{label}\t{value!r}" for label, value in self.components]
        lines.append(f"TOTAL\t{self.volume!r}")
        return "\n".join(lines) + "\n"


def prism_report(components) -> VolumeReport:
    return VolumeReport("prism", [(str(k), float(v)) for k, v in components])


@dataclass(frozen=True, eq=False)
class DemDiff:
    change: DemGrid
    net: float
    cut: float
    fill: float


def dem_diff(a: DemGrid, b: DemGrid) -> DemDiff:
    """Per-cell ``b - a`` and the net, cut and fill volumes."""
    if not a.same_geometry(b):
        raise ValueError("DEM geometries differ")
    dz = b.z - a.z
    valid = ~np.isnan(dz)
    cell = a.cellsize * a.cellsize
    d = dz[valid]
    fill = float(np.sum(np.maximum(d, 0.0)) * cell)
    cut = float(np.sum(np.maximum(-d, 0.0)) * cell)
    change = DemGrid(dz, a.xllcorner, a.yllcorner, a.cellsize, a.nodata)
    return DemDiff(change, fill - cut, cut, fill)
