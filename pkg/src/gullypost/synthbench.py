"""Synthetic channel scenes with known ground truth.

A scene is a sinuous, downhill channel (flat floor, inclined walls, flat
banks) sampled as a point cloud, a thalweg trajectory with stationary
periods at both ends, a top-down orthophoto in which the channel is dark,
and a barometer log consistent with the true elevations.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from gullypost.dbadc import STANDARD_PRESSURE, altitude_to_pressure
from gullypost.ingest import (
    BarometerSeries,
    DomRaster,
    read_barometer_csv,
    read_dom_pgm,
    read_point_cloud,
    read_trajectory_csv,
    write_barometer_csv,
    write_dom_pgm,
    write_point_cloud,
    write_trajectory_csv,
)
from gullypost.model import ParseError, PointCloud, Trajectory


@dataclass(frozen=True)
class SceneParams:
    length: float = 1000.0  # along-valley extent of the mapped reach, m
    depth: float = 30.0
    floor_width: float = 10.0
    wall_slope: float = 60.0  # degrees
    sinuosity_amplitude: float = 40.0
    sinuosity_wavelength: float = 400.0
    point_density: float = 2.0  # points per m^2 of surface
    trajectory_spacing: float = 1.0
    dom_cell: float = 5.0
    seed: int = 0
    gradient: float = 0.2  # floor drop per meter of valley
    bank_width: float = 10.0
    margin: float = 100.0  # channel continues this far beyond the reach in the DOM
    base_altitude: float = 1500.0
    speed: float = 1.0  # m/s
    dwell: float = 5.0  # stationary seconds at both ends
    baro_rate: float = 20.0  # Hz
    colored_fraction: float = 0.8
    p0: float = STANDARD_PRESSURE

    def __post_init__(self):
        for name in ("length", "depth", "floor_width", "sinuosity_wavelength", "point_density",
                     "trajectory_spacing", "dom_cell", "speed", "baro_rate", "p0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.wall_slope < 90:
            raise ValueError("wall_slope must lie in (0, 90) degrees")
        for name in ("sinuosity_amplitude", "gradient", "bank_width", "margin", "dwell"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.colored_fraction <= 1:
            raise ValueError("colored_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class DriftParams:
    true_fh: float = 1.0
    true_fe: float = 1.0
    point_noise: float = 0.0
    wobble_amplitude: float = 0.0
    wobble_wavelength: float = 500.0
    baro_noise: float = 0.0  # Pa

    def __post_init__(self):
        if not (self.true_fh > 0 and self.true_fe > 0 and self.wobble_wavelength > 0):
            raise ValueError("scales and wobble wavelength must be positive")
        if min(self.point_noise, self.wobble_amplitude, self.baro_noise) < 0:
            raise ValueError("noise levels must be >= 0")


@dataclass(frozen=True)
class AccuracyReport:
    elevation_bias: float
    elevation_rmse: float
    endpoint_bias: float
    displacement_error_pct: float
    distance_error_pct: float

    def rows(self):
        return list(asdict(self).items())


@dataclass(frozen=True, eq=False)
class Scene:
    map: PointCloud
    trajectory: Trajectory
    dom: DomRaster
    baro: BarometerSeries
    footprint: np.ndarray  # true channel pixels of the DOM
    truth: dict


@dataclass(frozen=True, eq=False)
class DriftedScene:
    map: PointCloud
    trajectory: Trajectory
    baro: BarometerSeries | None = None


# ---------------------------------------------------------------- geometry


class _Channel:
    def __init__(self, p: SceneParams):
        self.p = p
        self.k = 2 * np.pi / p.sinuosity_wavelength
        tan = np.tan(np.radians(p.wall_slope))
        self.half_floor = p.floor_width / 2
        self.wall_run = p.depth / tan
        self.wall_len = p.depth / np.sin(np.radians(p.wall_slope))
        self.half_top = self.half_floor + self.wall_run
        self.half_profile = self.half_floor + self.wall_len + p.bank_width

    def center(self, x):
        return np.column_stack([x, self.p.sinuosity_amplitude * np.sin(self.k * x)])

    def normal(self, x):
        dy = self.p.sinuosity_amplitude * self.k * np.cos(self.k * x)
        n = np.hypot(1.0, dy)
        return np.column_stack([-dy / n, 1.0 / n])

    def floor_z(self, x):
        return -self.p.gradient * x

    def arc_table(self, x0, x1, step=0.05):
        x = np.linspace(x0, x1, int(np.ceil((x1 - x0) / step)) + 1)
        c = self.center(x)
        s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(c, axis=0).T))])
        return x, s

    def profile(self, q):
        """Lateral offset and height for signed profile arc position ``q``."""
        a = np.abs(q)
        hf, wl = self.half_floor, self.wall_len
        sin, cos = np.sin(np.radians(self.p.wall_slope)), np.cos(np.radians(self.p.wall_slope))
        on_wall = (a > hf) & (a <= hf + wl)
        on_bank = a > hf + wl
        n = np.where(on_wall, hf + (a - hf) * cos, a)
        n = np.where(on_bank, self.half_top + (a - hf - wl), n)
        h = np.where(on_wall, (a - hf) * sin, 0.0)
        h = np.where(on_bank, self.p.depth, h)
        return np.sign(q) * n, h, np.where(on_bank, 2, np.where(on_wall, 1, 0))


# ---------------------------------------------------------------- generation


def gen_scene(params: SceneParams) -> Scene:
    p = params
    rng = np.random.default_rng(p.seed)
    ch = _Channel(p)

    # trajectory along the thalweg, equally spaced in arc length
    xt, st = ch.arc_table(0.0, p.length)
    total = st[-1]
    stations = np.arange(0.0, total, p.trajectory_spacing)
    if total - stations[-1] > 1e-9:
        stations = np.append(stations, total)
    x_move = np.interp(stations, st, xt)
    dt = p.trajectory_spacing / p.speed
    n_dwell = int(round(p.dwell / dt))
    x_samples = np.concatenate([np.full(n_dwell, x_move[0]), x_move, np.full(n_dwell, x_move[-1])])
    t = np.arange(len(x_samples)) * dt
    traj_xyz = np.column_stack([ch.center(x_samples), ch.floor_z(x_samples)])
    trajectory = Trajectory(t, traj_xyz)

    # surface points: uniform in (valley arc length, profile arc length)
    n_pts = int(round(p.point_density * total * 2 * ch.half_profile))
    s_pts = rng.random(n_pts) * total
    q_pts = (rng.random(n_pts) * 2 - 1) * ch.half_profile
    x_pts = np.interp(s_pts, st, xt)
    lat, h, kind = ch.profile(q_pts)
    xy = ch.center(x_pts) + lat[:, None] * ch.normal(x_pts)
    xyz = np.column_stack([xy, ch.floor_z(x_pts) + h])
    palette = np.array([[120, 100, 80], [150, 150, 150], [60, 120, 50]], dtype=np.int64)
    rgb = np.clip(palette[kind] + rng.integers(-15, 16, size=(n_pts, 3)), 0, 255).astype(np.uint8)
    colored = rng.random(n_pts) < p.colored_fraction
    cloud = PointCloud(xyz, rgb, colored)

    # orthophoto: channel footprint darker than the banks
    pad = ch.half_profile + 4 * p.dom_cell
    x0, x1 = -p.margin - pad, p.length + p.margin + pad
    y1 = p.sinuosity_amplitude + pad
    y0 = -y1
    cell = p.dom_cell
    width = int(np.ceil((x1 - x0) / cell))
    height = int(np.ceil((y1 - y0) / cell))
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    px = x0 + (cols + 0.5) * cell
    py = y1 - (rows + 0.5) * cell
    xd, _ = ch.arc_table(-p.margin, p.length + p.margin, step=0.25)
    tree = cKDTree(ch.center(xd))
    dist, _ = tree.query(np.column_stack([px.ravel(), py.ravel()]))
    footprint = (dist <= ch.half_top).reshape(height, width)
    values = np.where(footprint, 60.0, 180.0) + rng.normal(0.0, 8.0, size=footprint.shape)
    dom = DomRaster(np.clip(np.round(values), 0, 255).astype(np.uint8), x0, y1, cell)

    # barometer log over the recording
    tb = np.arange(0.0, t[-1] + 1e-9, 1.0 / p.baro_rate)
    alt = p.base_altitude + np.interp(tb, t, traj_xyz[:, 2])
    baro = BarometerSeries(tb, altitude_to_pressure(alt, p.p0))

    start, end = traj_xyz[0], traj_xyz[-1]
    truth = {
        "start_x": float(start[0]), "start_y": float(start[1]), "start_z": float(start[2]),
        "end_x": float(end[0]), "end_y": float(end[1]), "end_z": float(end[2]),
        "reference_displacement": float(np.hypot(*(end[:2] - start[:2]))),
        "reference_distance": float(total),
        "base_altitude": p.base_altitude,
        "p0": p.p0,
        "seed": p.seed,
        "n_points": n_pts,
    }
    return Scene(cloud, trajectory, dom, baro, footprint, truth)


def inject_drift(truth_map: PointCloud, truth_trajectory: Trajectory, drift: DriftParams,
                 seed: int = 0, baro: BarometerSeries | None = None) -> DriftedScene:
    """Shrink a true scene into a drifted SLAM-like one.

    XY is divided by ``true_fh`` and z by ``true_fe`` so those are exactly
    the factors that restore the truth. A lateral wobble that depends on
    true x is applied to map and trajectory alike; Gaussian noise is added
    to map points and, when ``baro`` is given, to the pressures.
    """
    rng = np.random.default_rng(seed)
    inv = np.array([1.0 / drift.true_fh, 1.0 / drift.true_fh, 1.0 / drift.true_fe])

    def warp(xyz):
        out = xyz * inv
        if drift.wobble_amplitude > 0:
            out[:, 1] += drift.wobble_amplitude * np.sin(2 * np.pi * xyz[:, 0] / drift.wobble_wavelength)
        return out

    m = warp(truth_map.xyz)
    if drift.point_noise > 0:
        m = m + rng.normal(0.0, drift.point_noise, size=m.shape)
    noisy_baro = None
    if baro is not None:
        pressure = baro.pressure
        if drift.baro_noise > 0:
            pressure = pressure + rng.normal(0.0, drift.baro_noise, size=len(pressure))
        noisy_baro = BarometerSeries(baro.t, pressure)
    return DriftedScene(
        truth_map.with_xyz(m),
        Trajectory(truth_trajectory.t, warp(truth_trajectory.xyz)),
        noisy_baro,
    )


# ---------------------------------------------------------------- evaluation


def evaluate(
    trajectory: Trajectory,
    benchmark_t,
    benchmark_z,
    truth_end,
    reference_displacement: float,
    reference_distance: float,
    truth_start=None,
) -> AccuracyReport:
    """Elevation and end-point accuracy of a (corrected) trajectory.

    Every trajectory sample inside the common time range is paired with
    the benchmark sample nearest in time. ``truth_start`` is accepted for
    symmetry with the bundle layout and is not used.
    """
    bt = np.asarray(benchmark_t, dtype=np.float64)
    bz = np.asarray(benchmark_z, dtype=np.float64)
    if bt.shape != bz.shape or bt.ndim != 1:
        raise ValueError("benchmark t and z must be equal-length vectors")
    if not (reference_displacement > 0 and reference_distance > 0):
        raise ValueError("reference lengths must be positive")
    lo, hi = max(trajectory.t[0], bt.min(initial=np.inf)), min(trajectory.t[-1], bt.max(initial=-np.inf))
    sel = (trajectory.t >= lo) & (trajectory.t <= hi)
    if not np.any(sel):
        raise ValueError("trajectory and benchmark do not overlap in time")
    order = np.argsort(bt, kind="stable")
    bt, bz = bt[order], bz[order]
    tq = trajectory.t[sel]
    i = np.clip(np.searchsorted(bt, tq), 1, len(bt) - 1) if len(bt) > 1 else np.zeros(len(tq), int)
    if len(bt) > 1:
        left_closer = (tq - bt[i - 1]) <= (bt[i] - tq)
        i = np.where(left_closer, i - 1, i)
    diff = trajectory.xyz[sel, 2] - bz[i]
    bias = float(np.mean(diff))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    end = np.asarray(truth_end, dtype=np.float64)
    endpoint = float(np.hypot(*(trajectory.xyz[-1, :2] - end[:2])))
    return AccuracyReport(
        bias,
        rmse,
        endpoint,
        100.0 * endpoint / reference_displacement,
        100.0 * endpoint / reference_distance,
    )


# ---------------------------------------------------------------- bundles

BUNDLE_FILES = ("map.ply", "trajectory.csv", "dom.pgm", "dom.wld", "baro.csv", "truth.json")


def write_bundle(directory, cloud: PointCloud, trajectory: Trajectory, dom: DomRaster,
                 baro: BarometerSeries, truth: dict) -> None:
    os.makedirs(directory, exist_ok=True)
    write_point_cloud(cloud, os.path.join(directory, "map.ply"))
    write_trajectory_csv(trajectory, os.path.join(directory, "trajectory.csv"))
    write_dom_pgm(dom, os.path.join(directory, "dom.pgm"), os.path.join(directory, "dom.wld"))
    write_barometer_csv(baro, os.path.join(directory, "baro.csv"))
    flat = {k: v for k, v in truth.items() if isinstance(v, (int, float, str, bool))}
    with open(os.path.join(directory, "truth.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(flat, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_bundle(directory):
    """Return ``(map, trajectory, dom, baro, truth)``; truth is {} if absent."""
    j = lambda name: os.path.join(directory, name)  # noqa: E731
    cloud = read_point_cloud(j("map.ply"))
    trajectory = read_trajectory_csv(j("trajectory.csv"))
    dom = read_dom_pgm(j("dom.pgm"), j("dom.wld"))
    baro = read_barometer_csv(j("baro.csv"))
    truth = {}
    if os.path.exists(j("truth.json")):
        try:
            with open(j("truth.json"), encoding="utf-8") as fh:
                truth = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), j("truth.json"), exc.lineno) from None
        if not isinstance(truth, dict):
            raise ParseError("truth.json must hold a flat object", j("truth.json"), 1)
    return cloud, trajectory, dom, baro, truth


def make_bundle(directory, scene_params: SceneParams, drift: DriftParams, drift_seed: int | None = None) -> dict:
    """Generate, drift and write a scene bundle; returns the truth record."""
    scene = gen_scene(scene_params)
    seed = scene_params.seed + 1 if drift_seed is None else drift_seed
    drifted = inject_drift(scene.map, scene.trajectory, drift, seed, scene.baro)
    truth = dict(scene.truth)
    truth.update({"true_fh": drift.true_fh, "true_fe": drift.true_fe,
                  "point_noise": drift.point_noise, "baro_noise": drift.baro_noise})
    write_bundle(directory, drifted.map, drifted.trajectory, scene.dom, drifted.baro, truth)
    return truth
