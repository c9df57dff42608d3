"""Readers and writers for point clouds, trajectories, barometer logs,
orthophoto rasters and DEM grids.

Formats
-------
* point cloud: ASCII PLY, ``x y z`` doubles with optional
  ``red green blue colored`` uchar columns
* trajectory: ``t,x,y,z`` CSV, no header
* barometer: ``t,pressure_pa`` CSV, no header
* orthophoto: PGM (P2 or P5, maxval <= 255) plus a 6-line world file
* DEM: ESRI ASCII grid
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass

import numpy as np

from gullypost.model import ParseError, PointCloud, Trajectory

DEFAULT_NODATA = -9999.0

# ---------------------------------------------------------------- PLY

_XYZ = ("x", "y", "z")
_COLOR = ("red", "green", "blue", "colored")
_FLOAT_TYPES = {"double", "float64", "float", "float32"}
_UCHAR_TYPES = {"uchar", "uint8"}


def _read_lines(path):
    with open(path, "r", encoding="ascii", errors="strict", newline=None) as fh:
        return fh.read().split("\n")


def read_point_cloud(path) -> PointCloud:
    try:
        lines = _read_lines(path)
    except UnicodeDecodeError:
        raise ParseError("not an ASCII PLY file", path, 1) from None
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", path, 1)
    n_vertex = None
    props = []
    header_end = None
    for i, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if tok[1:] != ["ascii", "1.0"]:
                raise ParseError(f"unsupported format {' '.join(tok[1:])!r}", path, i)
        elif tok[0] == "element":
            if len(tok) != 3 or tok[1] != "vertex" or n_vertex is not None:
                raise ParseError(f"unsupported element line {raw.strip()!r}", path, i)
            try:
                n_vertex = int(tok[2])
            except ValueError:
                raise ParseError(f"bad vertex count {tok[2]!r}", path, i) from None
            if n_vertex < 0:
                raise ParseError("negative vertex count", path, i)
        elif tok[0] == "property":
            if n_vertex is None or len(tok) != 3:
                raise ParseError(f"bad property line {raw.strip()!r}", path, i)
            props.append((tok[2], tok[1], i))
        elif tok[0] == "end_header":
            header_end = i
            break
        else:
            raise ParseError(f"unexpected header line {raw.strip()!r}", path, i)
    if header_end is None:
        raise ParseError("missing end_header", path, len(lines))
    if n_vertex is None:
        raise ParseError("missing 'element vertex'", path, header_end)
    names = [p[0] for p in props]
    if tuple(names) == _XYZ:
        has_color = False
    elif tuple(names) == _XYZ + _COLOR:
        has_color = True
    else:
        raise ParseError(f"unsupported vertex properties {names}", path, header_end)
    for name, typ, line in props:
        ok = _FLOAT_TYPES if name in _XYZ else _UCHAR_TYPES
        if typ not in ok:
            raise ParseError(f"property {name} has unsupported type {typ}", path, line)

    body = lines[header_end:]
    while body and not body[-1].strip():
        body.pop()
    ncol = 7 if has_color else 3
    if len(body) != n_vertex:
        line = header_end + min(len(body), n_vertex) + 1
        raise ParseError(
            f"header declares {n_vertex} vertices, body has {len(body)}", path, line
        )
    if n_vertex == 0:
        return PointCloud(np.empty((0, 3)))
    data = _parse_table(body, ncol, path, header_end + 1, sep=None)
    xyz = data[:, :3]
    if has_color:
        col = data[:, 3:]
        bad = np.nonzero(
            np.any((col < 0) | (col > 255) | (col != np.round(col)), axis=1)
            | ((col[:, 3] != 0) & (col[:, 3] != 1))
        )[0]
        if len(bad):
            raise ParseError("color values must be integers in [0, 255], colored in {0, 1}",
                             path, header_end + 1 + int(bad[0]))
        rgb = col[:, :3].astype(np.uint8)
        colored = col[:, 3] == 1
        return PointCloud(xyz, rgb, colored)
    return PointCloud(xyz)


def _parse_table(body, ncol, path, first_line, sep):
    """Parse ``body`` (list of lines) into an ``(n, ncol)`` float array.

    ``first_line`` is the 1-based file line of ``body[0]``.
    """
    text = "\n".join(body)
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=sep, ndmin=2, dtype=np.float64)
        if data.shape != (len(body), ncol):
            raise ValueError
    except ValueError:
        for i, raw in enumerate(body):
            tok = raw.split(sep) if sep else raw.split()
            if len(tok) != ncol:
                raise ParseError(f"expected {ncol} values, got {len(tok)}", path, first_line + i) from None
            try:
                [float(t) for t in tok]
            except ValueError:
                raise ParseError(f"not a number in {raw.strip()!r}", path, first_line + i) from None
        raise ParseError("unparseable table", path, first_line) from None
    bad = np.nonzero(~np.all(np.isfinite(data), axis=1))[0]
    if len(bad):
        raise ParseError("non-finite value", path, first_line + int(bad[0]))
    return data


def write_point_cloud(cloud: PointCloud, path) -> None:
    has_color = bool(cloud.colored.any())
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    header += [f"property double {c}" for c in _XYZ]
    if has_color:
        header += [f"property uchar {c}" for c in _COLOR]
    header.append("end_header")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        if not len(cloud):
            return
        if has_color:
            rgb = np.where(cloud.colored[:, None], cloud.rgb, 0).astype(np.int64)
            table = np.column_stack([cloud.xyz, rgb, cloud.colored.astype(np.int64)])
            np.savetxt(fh, table, fmt=["%.17g"] * 3 + ["%d"] * 4)
        else:
            np.savetxt(fh, cloud.xyz, fmt="%.17g")


# ---------------------------------------------------------------- CSV logs


@dataclass(frozen=True, eq=False)
class BarometerSeries:
    """Barometer samples; ``t`` non-decreasing seconds, ``pressure`` in Pa."""

    t: np.ndarray
    pressure: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64)
        p = np.array(self.pressure, dtype=np.float64)
        if t.shape != p.shape or t.ndim != 1:
            raise ValueError("t and pressure must be equal-length vectors")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("barometer values must be finite")
        if np.any(p <= 0):
            raise ValueError("pressure must be positive")
        if np.any(np.diff(t) < 0):
            raise ValueError("barometer timestamps must be non-decreasing")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "pressure", p)

    def __len__(self):
        return len(self.t)


def _read_csv(path, ncol):
    lines = _read_lines(path)
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty file", path, 1)
    return _parse_table(lines, ncol, path, 1, sep=",")


def read_trajectory_csv(path) -> Trajectory:
    data = _read_csv(path, 4)
    if data[0, 0] < 0:
        raise ParseError("negative timestamp", path, 1)
    bad = np.nonzero(np.diff(data[:, 0]) <= 0)[0]
    if len(bad):
        line = int(bad[0]) + 2
        raise ParseError(f"timestamps not strictly increasing (line {line})", path, line)
    return Trajectory(data[:, 0], data[:, 1:])


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        np.savetxt(fh, np.column_stack([traj.t, traj.xyz]), fmt="%.17g", delimiter=",")


def read_barometer_csv(path) -> BarometerSeries:
    data = _read_csv(path, 2)
    bad = np.nonzero(data[:, 1] <= 0)[0]
    if len(bad):
        raise ParseError("pressure must be positive", path, int(bad[0]) + 1)
    bad = np.nonzero(np.diff(data[:, 0]) < 0)[0]
    if len(bad):
        line = int(bad[0]) + 2
        raise ParseError(f"timestamps decreasing (line {line})", path, line)
    return BarometerSeries(data[:, 0], data[:, 1])


def write_barometer_csv(baro: BarometerSeries, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        np.savetxt(fh, np.column_stack([baro.t, baro.pressure]), fmt="%.17g", delimiter=",")


# ---------------------------------------------------------------- DOM raster


@dataclass(frozen=True, eq=False)
class DomRaster:
    """Grayscale orthophoto. ``values[row, col]``, row 0 is the north edge.

    ``origin_x, origin_y`` are the world coordinates of the outer
    (north-west) corner of the top-left pixel.
    """

    values: np.ndarray
    origin_x: float
    origin_y: float
    cell: float

    def __post_init__(self):
        v = np.array(self.values, dtype=np.uint8)
        if v.ndim != 2:
            raise ValueError("raster values must be 2D")
        if not self.cell > 0:
            raise ValueError("cell size must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        for name in ("origin_x", "origin_y", "cell"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def pixel_center(self, col, row):
        col = np.asarray(col, dtype=np.float64)
        row = np.asarray(row, dtype=np.float64)
        return self.origin_x + (col + 0.5) * self.cell, self.origin_y - (row + 0.5) * self.cell


def _pgm_tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            break
        out.append(data[start:pos])
    return out, pos


def read_dom_pgm(pgm_path, world_path) -> DomRaster:
    with open(pgm_path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError("not a P2/P5 PGM file", pgm_path, 1)
    tok, pos = _pgm_tokens(data, 3, 2)
    if len(tok) != 3:
        raise ParseError("truncated PGM header", pgm_path)
    try:
        width, height, maxval = (int(t) for t in tok)
    except ValueError:
        raise ParseError("non-integer PGM header", pgm_path) from None
    if width <= 0 or height <= 0:
        raise ParseError("PGM dimensions must be positive", pgm_path)
    if not 0 < maxval <= 255:
        raise ParseError(f"maxval {maxval} exceeds 255", pgm_path)
    n = width * height
    if magic == b"P5":
        body = data[pos + 1 : pos + 1 + n]
        if len(body) != n:
            raise ParseError(f"expected {n} pixel bytes, got {len(body)}", pgm_path)
        values = np.frombuffer(body, dtype=np.uint8).copy()
    else:
        words = data[pos:].split()
        if len(words) != n:
            raise ParseError(f"expected {n} pixel values, got {len(words)}", pgm_path)
        try:
            values = np.array([int(w) for w in words], dtype=np.int64)
        except ValueError:
            raise ParseError("non-integer pixel value", pgm_path) from None
    if values.max(initial=0) > maxval or values.min(initial=0) < 0:
        raise ParseError("pixel value outside [0, maxval]", pgm_path)
    values = values.reshape(height, width).astype(np.uint8)

    wl = [ln.strip() for ln in _read_lines(world_path) if ln.strip()]
    if len(wl) != 6:
        raise ParseError(f"world file needs 6 values, got {len(wl)}", world_path)
    try:
        cx, r1, r2, cy, ox, oy = (float(v) for v in wl)
    except ValueError:
        raise ParseError("non-numeric world file value", world_path) from None
    if r1 != 0 or r2 != 0:
        raise ParseError("rotated world files are not supported", world_path, 2)
    if abs(cx) != abs(cy) or cx == 0:
        raise ParseError(f"non-square cell ({cx} x {cy})", world_path, 4)
    return DomRaster(values, ox, oy, abs(cx))


def write_dom_pgm(dom: DomRaster, pgm_path, world_path, binary: bool = True) -> None:
    h, w = dom.values.shape
    with open(pgm_path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(dom.values.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode("ascii"))
            for row in dom.values:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))
    with open(world_path, "w", encoding="ascii", newline="\n") as fh:
        for v in (dom.cell, 0.0, 0.0, -dom.cell, dom.origin_x, dom.origin_y):
            fh.write(f"{float(v)!r}\n")


# ---------------------------------------------------------------- DEM grid


@dataclass(frozen=True, eq=False)
class DemGrid:
    """Elevation raster. ``z[row, col]`` with row 0 the north row; NaN = nodata."""

    z: np.ndarray
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64)
        if z.ndim != 2:
            raise ValueError("DEM must be 2D")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be positive")
        if np.any(np.isinf(z)):
            raise ValueError("DEM values must be finite or NaN")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        for name in ("xllcorner", "yllcorner", "cellsize", "nodata"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def nrows(self) -> int:
        return self.z.shape[0]

    @property
    def ncols(self) -> int:
        return self.z.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.z)

    def same_geometry(self, other: DemGrid) -> bool:
        return (
            self.z.shape == other.z.shape
            and self.xllcorner == other.xllcorner
            and self.yllcorner == other.yllcorner
            and self.cellsize == other.cellsize
        )


def _num(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def write_dem_asc(dem: DemGrid, path, decimals: int = 1) -> None:
    nodata = _num(dem.nodata)
    fmt = f"%.{decimals}f"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"ncols {dem.ncols}\n")
        fh.write(f"nrows {dem.nrows}\n")
        fh.write(f"xllcorner {_num(dem.xllcorner)}\n")
        fh.write(f"yllcorner {_num(dem.yllcorner)}\n")
        fh.write(f"cellsize {_num(dem.cellsize)}\n")
        fh.write(f"NODATA_value {nodata}\n")
        for row in dem.z:
            fh.write(" ".join(nodata if math.isnan(v) else fmt % v for v in row) + "\n")


_ASC_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_dem_asc(path) -> DemGrid:
    lines = _read_lines(path)
    head = {}
    i = 0
    while i < len(lines) and len(head) < len(_ASC_KEYS):
        tok = lines[i].split()
        i += 1
        if not tok:
            continue
        key = tok[0].lower()
        if key not in _ASC_KEYS or len(tok) != 2:
            raise ParseError(f"unexpected header line {lines[i - 1].strip()!r}", path, i)
        try:
            head[key] = float(tok[1])
        except ValueError:
            raise ParseError(f"bad header value {tok[1]!r}", path, i) from None
    if len(head) != len(_ASC_KEYS):
        raise ParseError("incomplete ASC header", path, i)
    ncols, nrows = int(head["ncols"]), int(head["nrows"])
    body = lines[i:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != nrows:
        raise ParseError(f"expected {nrows} rows, got {len(body)}", path, i + len(body) + 1)
    z = _parse_table(body, ncols, path, i + 1, sep=None) if nrows else np.empty((0, ncols))
    nodata = head["nodata_value"]
    z = np.where(z == nodata, np.nan, z)
    return DemGrid(z, head["xllcorner"], head["yllcorner"], head["cellsize"], nodata)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
