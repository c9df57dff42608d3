"""Stage wiring shared by the CLI subcommands."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import platform

import numpy as np
import scipy
import shapely

from gullypost import __version__, analysis, dbadc, plotting, synthbench, wevg, xsect
from gullypost.config import PipelineConfig
from gullypost.ingest import (
    write_dem_asc,
    write_point_cloud,
    write_trajectory_csv,
)
from gullypost.model import NumericalError, Trajectory

log = logging.getLogger(__name__)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, command, inputs, cfg: PipelineConfig, outputs=(), extra=None):
    """Run record: input hashes, config and its hash, versions, results.

    Only file names (not directories) are recorded so that identical runs
    into different output folders produce identical manifests.
    """
    out_dir = os.path.dirname(os.path.abspath(path))
    record = {
        "command": command,
        "inputs": {os.path.basename(p): sha256_file(p) for p in inputs},
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "versions": {
            "gullypost": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": {
            os.path.relpath(p, out_dir).replace(os.sep, "/"): sha256_file(p) for p in sorted(outputs)
        },
    }
    if extra:
        record.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return record


def run_correction(cloud, trajectory, dom, baro, cfg: PipelineConfig, force=False):
    res = dbadc.correct_drift(
        cloud,
        trajectory,
        dom,
        baro,
        p0=cfg.p0,
        baro_window=cfg.baro_window,
        segment_window=cfg.segment_window,
        segment_bias=cfg.segment_bias,
        invert=cfg.invert,
        centerline_spacing=cfg.centerline_spacing,
        knot_spacing=cfg.centerline_knot_spacing or None,
        n_resample=cfg.fragment_n_resample,
        icp_max_iter=cfg.icp_max_iter,
        icp_tol=cfg.icp_tol,
        smooth_window=cfg.smooth_window,
        densify_spacing=cfg.densify_spacing,
        sign=cfg.correction_sign,
    )
    if not res.scale_fit.converged:
        msg = f"scale ICP did not converge in {res.scale_fit.iterations} iterations"
        if not force:
            raise NumericalError(msg + " (use --force to accept the best estimate)")
        log.warning(msg)
    return res


def factor_record(res) -> dict:
    return {
        "f_h": res.factors.f_h,
        "f_e": res.factors.f_e,
        "fragment_score": res.fragment_score,
        "icp_converged": res.scale_fit.converged,
        "icp_iterations": res.scale_fit.iterations,
    }


def section_stations(anchors: Trajectory, every: float, a: int) -> list[int]:
    """Anchor indices roughly every ``every`` meters of XY arc length."""
    xy = anchors.xyz[:, :2]
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(xy, axis=0).T))])
    targets = np.arange(every, s[-1], every)
    js = np.searchsorted(s, targets)
    js = [int(j) for j in js if a <= j < len(anchors) - a]
    return sorted(set(js))


def build_sections(cloud, partition, anchors, cfg: PipelineConfig, stations=None):
    """Raw and reconstructed sections plus the area under bank-full level.

    Returns a list of dicts with keys ``j, s, raw, rec, area`` (area None
    when undefined); sections with too few points are skipped.
    """
    if stations is None:
        stations = section_stations(anchors, cfg.section_every, cfg.xsect_a)
    xy = anchors.xyz[:, :2]
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(xy, axis=0).T))])
    out = []
    need = max(2 * cfg.wevg_n + 1, cfg.wevg_k_density + 1)
    for j in stations:
        try:
            raw = xsect.extract_section(cloud, partition, anchors, j, cfg.xsect_a, cfg.slope_threshold,
                                        squared=cfg.projection_denominator == "squared")
        except NumericalError as exc:
            log.info("section %d skipped: %s", j, exc)
            continue
        if len(raw) < need:
            log.info("section %d skipped: %d points", j, len(raw))
            continue
        rec = xsect.reconstruct(raw, cfg.wevg_n, cfg.xsect_spacing, cfg.wevg_k_density)
        cap = float(min(rec.wh[0, 1], rec.wh[-1, 1]))
        area = _section_area(j, rec, cap)
        out.append({"j": j, "s": float(arc[j]), "raw": raw, "rec": rec, "area": area})
    return out


def _section_area(j, rec, cap):
    try:
        trimmed = xsect.trim_below(rec, cap)
    except ValueError:
        return None
    try:
        return xsect.section_area(trimmed, cap)
    except NumericalError:
        # sliver overlaps from height-sorted wall runs; measure the repaired ring
        ring = np.vstack([trimmed.wh, [[trimmed.wh[-1, 0], cap], [trimmed.wh[0, 0], cap]]])
        area = float(shapely.make_valid(shapely.Polygon(ring)).area)
        log.info("section %d: self-intersecting ring repaired, area %.3f", j, area)
        return area


def section_volume_report(sections) -> analysis.VolumeReport:
    """Trapezoids between consecutive stations with a defined area."""
    good = [s for s in sections if s["area"] is not None]
    comps = []
    for a, b in zip(good[:-1], good[1:]):
        v = analysis.deposit_volume_sections([a["area"], b["area"]], b["s"] - a["s"])
        comps.append((f"{a['j']}-{b['j']}", v))
    return analysis.VolumeReport("section-integration", comps)


def write_sections(sections, directory):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for sec in sections:
        p = os.path.join(directory, f"section_{sec['j']:06d}.csv")
        xsect.write_section_csv(sec["rec"], p)
        paths.append(p)
    p = os.path.join(directory, "areas.tsv")
    with open(p, "w", encoding="ascii", newline="\n") as fh:
        fh.write("unit\tstation_m\tarea_m2\n")
        for sec in sections:
            area = "nan" if sec["area"] is None else repr(sec["area"])
            fh.write(f"{sec['j']}\t{sec['s']!r}\t{area}\n")
    paths.append(p)
    return paths


def barometer_benchmark(trajectory, baro, cfg: PipelineConfig):
    """Barometric elevation relative to the trajectory start."""
    alt = dbadc.pressure_to_altitude(baro.pressure, cfg.p0)
    ref = dbadc._baro_altitude_at(baro, float(trajectory.t[0]), cfg.p0, cfg.baro_window, "start")
    return baro.t, alt - ref + trajectory.xyz[0, 2]


def write_report(path, rows):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for key, value in rows:
            if isinstance(value, float):
                value = repr(value)
            fh.write(f"{key}\t{value}\n")


def run_pipeline(bundle_dir, out_dir, cfg: PipelineConfig, figures=True, force=False):
    """Full run on a scene bundle; returns the report rows."""
    cloud, trajectory, dom, baro, truth = synthbench.read_bundle(bundle_dir)
    os.makedirs(out_dir, exist_ok=True)
    outputs = []

    def out(name):
        p = os.path.join(out_dir, name)
        outputs.append(p)
        return p

    res = run_correction(cloud, trajectory, dom, baro, cfg, force)
    write_point_cloud(res.corrected, out("corrected_map.ply"))
    write_trajectory_csv(res.trajectory_scaled, out("corrected_trajectory.csv"))
    write_trajectory_csv(res.t2_scaled, out("anchors.csv"))

    smoothed = wevg.smooth(res.corrected, cfg.wevg_n, cfg.wevg_k_density, cfg.wevg_include_self)
    write_point_cloud(smoothed, out("smoothed_map.ply"))

    sections = build_sections(smoothed, res.partition, res.t2_scaled, cfg)
    outputs.extend(write_sections(sections, os.path.join(out_dir, "sections")))
    volume = section_volume_report(sections)
    with open(out("volume.tsv"), "w", encoding="ascii", newline="\n") as fh:
        fh.write(volume.to_text())

    if smoothed.colored.any():
        write_point_cloud(analysis.recolor(smoothed, cfg.recolor_k, cfg.recolor_radius), out("colored_map.ply"))
    dem = analysis.rasterize_dem(smoothed, cfg.dem_cell, cfg.dem_quantum)
    write_dem_asc(dem, out("dem.asc"))

    rows = [(k, v) for k, v in factor_record(res).items()]
    rows += [
        ("n_points", len(cloud)),
        ("n_units", res.partition.n_units),
        ("n_sections", len(sections)),
        ("dem_valid_cells", int(dem.valid.sum())),
        ("channel_volume_m3", volume.volume),
    ]
    bench_t = bench_z = None
    if truth:
        bench_t, bench_z = barometer_benchmark(trajectory, baro, cfg)
        end = (truth["end_x"], truth["end_y"])
        for tag, traj in (("input", trajectory), ("corrected", res.trajectory_scaled)):
            rep = synthbench.evaluate(traj, bench_t, bench_z, end,
                                      truth["reference_displacement"], truth["reference_distance"])
            rows += [(f"{tag}_{k}", v) for k, v in rep.rows()]
        if "true_fh" in truth:
            rows += [("true_fh", float(truth["true_fh"])), ("true_fe", float(truth["true_fe"]))]
    write_report(out("report.tsv"), rows)

    if figures:
        fdir = plotting.figure_dir(out_dir)
        end = (truth["end_x"], truth["end_y"]) if truth else None
        outputs.append(plotting.plot_plan(os.path.join(fdir, "plan.png"), dom, trajectory,
                                          res.trajectory_scaled, res.fragment, end))
        outputs.append(plotting.plot_elevation(os.path.join(fdir, "elevation.png"), trajectory,
                                               res.trajectory_scaled, bench_t, bench_z))
        p = plotting.plot_sections(os.path.join(fdir, "sections.png"),
                                   [(f"unit {s['j']}", s["raw"], s["rec"]) for s in sections])
        if p:
            outputs.append(p)
        outputs.append(plotting.plot_dem(os.path.join(fdir, "dem.png"), dem))

    inputs = [os.path.join(bundle_dir, n) for n in synthbench.BUNDLE_FILES
              if os.path.exists(os.path.join(bundle_dir, n))]
    write_manifest(os.path.join(out_dir, "manifest.json"), "pipeline", inputs, cfg, outputs,
                   extra=factor_record(res))
    return rows
