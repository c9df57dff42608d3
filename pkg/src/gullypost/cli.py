"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 input parse error,
3 numerical failure. Errors go to stderr prefixed with ``error:``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from gullypost import analysis, pipeline, synthbench, wevg, xsect
from gullypost.config import ConfigError, load_config
from gullypost.dbadc import partition_units
from gullypost.ingest import (
    read_barometer_csv,
    read_dem_asc,
    read_dom_pgm,
    read_point_cloud,
    read_trajectory_csv,
    write_dem_asc,
    write_point_cloud,
    write_trajectory_csv,
)
from gullypost.model import GullyError, NumericalError, ParseError, set_workers

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("gullypost")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _common(p):
    p.add_argument("--config", help="flat key = value config file (default: $GULLYPOST_CONFIG)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--threads", type=int, default=1, help="worker threads for neighbour queries")
    p.add_argument("--force", action="store_true", help="accept non-converged estimates")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gullypost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("correct", help="estimate f_h, f_e and correct map drift")
    p.add_argument("--map", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--dom", required=True, help="orthophoto PGM")
    p.add_argument("--world", help="world file (default: DOM path with .wld)")
    p.add_argument("--baro", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("smooth", help="weighted-elastic voxel smoothing")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("xsect", help="extract and reconstruct cross-sections")
    p.add_argument("--map", required=True, help="corrected (or smoothed) map")
    p.add_argument("--anchors", required=True, help="flattened unit anchors (anchors.csv from 'correct')")
    p.add_argument("--units", help="comma-separated anchor indices (default: every section_every m)")
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("recolor", help="fill uncolored points from colored neighbours")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("dem", help="rasterize a map to an ESRI ASCII DEM")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("volume", help="volume report from components or section areas")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--component", action="append", metavar="LABEL=M3", help="prism component volume")
    g.add_argument("--areas", help="file with one section area (m2) per line")
    p.add_argument("--spacing", type=float, help="station spacing for --areas (m)")
    p.add_argument("--out", help="report file (default: stdout)")
    _common(p)

    p = sub.add_parser("diff", help="difference two DEMs (b - a)")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True, help="change grid (.asc)")
    p.add_argument("--report", help="report file (default: stdout)")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic scene bundle")
    p.add_argument("--out", required=True)
    for name, default in (("length", 300.0), ("depth", 30.0), ("floor-width", 10.0), ("wall-slope", 60.0),
                          ("amplitude", 20.0), ("wavelength", 150.0), ("density", 2.0),
                          ("gradient", 0.2), ("dom-cell", 5.0), ("margin", 50.0)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fh", type=float, default=1.0)
    p.add_argument("--fe", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0, help="map point noise sigma (m)")
    p.add_argument("--baro-noise", type=float, default=0.0, help="pressure noise sigma (Pa)")
    p.add_argument("--wobble", type=float, default=0.0, help="lateral wobble amplitude (m)")
    _common(p)

    p = sub.add_parser("eval", help="accuracy of a corrected trajectory against bundle truth")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--baro", required=True)
    p.add_argument("--truth", required=True, help="truth.json")
    p.add_argument("--out", help="report file (default: stdout)")
    _common(p)

    p = sub.add_parser("pipeline", help="all stages on a scene bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    _common(p)
    return parser


def _config(args):
    cfg = load_config(args.config)
    pairs = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    return cfg.with_overrides(pairs) if pairs else cfg


def _emit(text, path):
    if path:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_correct(args, cfg):
    world = args.world or os.path.splitext(args.dom)[0] + ".wld"
    cloud = read_point_cloud(args.map)
    traj = read_trajectory_csv(args.trajectory)
    dom = read_dom_pgm(args.dom, world)
    baro = read_barometer_csv(args.baro)
    res = pipeline.run_correction(cloud, traj, dom, baro, cfg, args.force)
    os.makedirs(args.out, exist_ok=True)
    outs = [os.path.join(args.out, n) for n in ("corrected_map.ply", "corrected_trajectory.csv", "anchors.csv")]
    write_point_cloud(res.corrected, outs[0])
    write_trajectory_csv(res.trajectory_scaled, outs[1])
    write_trajectory_csv(res.t2_scaled, outs[2])
    pipeline.write_manifest(os.path.join(args.out, "manifest.json"), "correct",
                            [args.map, args.trajectory, args.dom, world, args.baro], cfg, outs,
                            extra=pipeline.factor_record(res))
    print(f"f_h\t{res.factors.f_h!r}\nf_e\t{res.factors.f_e!r}")


def _file_stage(args, cfg, fn, writer):
    result = fn(read_point_cloud(args.map))
    writer(result, args.out)
    pipeline.write_manifest(args.out + ".manifest.json", args.command, [args.map], cfg, [args.out])
    return result


def _cmd_smooth(args, cfg):
    _file_stage(args, cfg, lambda c: wevg.smooth(c, cfg.wevg_n, cfg.wevg_k_density, cfg.wevg_include_self),
                write_point_cloud)


def _cmd_recolor(args, cfg):
    _file_stage(args, cfg, lambda c: analysis.recolor(c, cfg.recolor_k, cfg.recolor_radius), write_point_cloud)


def _cmd_dem(args, cfg):
    _file_stage(args, cfg, lambda c: analysis.rasterize_dem(c, cfg.dem_cell, cfg.dem_quantum), write_dem_asc)


def _cmd_xsect(args, cfg):
    cloud = read_point_cloud(args.map)
    anchors = read_trajectory_csv(args.anchors)
    part = partition_units(cloud, anchors)
    ordered = part.reorder(cloud)
    stations = None
    if args.units:
        try:
            stations = [int(v) for v in args.units.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--units expects integers, got {args.units!r}") from None
        bad = [j for j in stations if not cfg.xsect_a <= j < len(anchors) - cfg.xsect_a]
        if bad:
            raise UsageError(f"section window exceeds trajectory for units {bad}")
    sections = pipeline.build_sections(ordered, part, anchors, cfg, stations)
    outs = pipeline.write_sections(sections, args.out)
    pipeline.write_manifest(os.path.join(args.out, "manifest.json"), "xsect", [args.map, args.anchors], cfg, outs)
    print(f"sections\t{len(sections)}")


def _cmd_volume(args, cfg):
    if args.component:
        comps = []
        for item in args.component:
            label, _, value = item.partition("=")
            try:
                comps.append((label, float(value)))
            except ValueError:
                raise UsageError(f"--component expects LABEL=M3, got {item!r}") from None
        report = analysis.prism_report(comps)
    else:
        if args.spacing is None:
            raise UsageError("--areas requires --spacing")
        with open(args.areas, encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        try:
            areas = [float(v) for v in lines]
        except ValueError as exc:
            raise ParseError(str(exc), args.areas) from None
        comps = [(f"{i}-{i + 1}", analysis.deposit_volume_sections(areas[i : i + 2], args.spacing))
                 for i in range(len(areas) - 1)]
        if not comps:
            raise GullyError("need at least 2 stations")
        report = analysis.VolumeReport("section-integration", comps)
    _emit(report.to_text(), args.out)


def _cmd_diff(args, cfg):
    a, b = read_dem_asc(args.a), read_dem_asc(args.b)
    d = analysis.dem_diff(a, b)
    write_dem_asc(d.change, args.out, decimals=2)
    _emit(f"net\t{d.net!r}\ncut\t{d.cut!r}\nfill\t{d.fill!r}\n", args.report)


def _cmd_synth(args, cfg):
    sp = synthbench.SceneParams(
        length=args.length, depth=args.depth, floor_width=args.floor_width, wall_slope=args.wall_slope,
        sinuosity_amplitude=args.amplitude, sinuosity_wavelength=args.wavelength,
        point_density=args.density, gradient=args.gradient, dom_cell=args.dom_cell,
        margin=args.margin, seed=args.seed, p0=cfg.p0,
    )
    drift = synthbench.DriftParams(args.fh, args.fe, args.noise, args.wobble, baro_noise=args.baro_noise)
    truth = synthbench.make_bundle(args.out, sp, drift)
    print(f"points\t{truth['n_points']}")


def _cmd_eval(args, cfg):
    traj = read_trajectory_csv(args.trajectory)
    baro = read_barometer_csv(args.baro)
    try:
        with open(args.truth, encoding="utf-8") as fh:
            truth = json.load(fh)
        end = (truth["end_x"], truth["end_y"])
        disp, dist = truth["reference_displacement"], truth["reference_distance"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"bad truth record: {exc}", args.truth) from None
    bt, bz = pipeline.barometer_benchmark(traj, baro, cfg)
    rep = synthbench.evaluate(traj, bt, bz, end, disp, dist)
    _emit("".join(f"{k}\t{v!r}\n" for k, v in rep.rows()), args.out)


def _cmd_pipeline(args, cfg):
    rows = pipeline.run_pipeline(args.bundle, args.out, cfg, figures=not args.no_figures, force=args.force)
    for k, v in rows[:2]:
        print(f"{k}\t{v!r}")


COMMANDS = {
    "correct": _cmd_correct,
    "smooth": _cmd_smooth,
    "xsect": _cmd_xsect,
    "recolor": _cmd_recolor,
    "dem": _cmd_dem,
    "volume": _cmd_volume,
    "diff": _cmd_diff,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        set_workers(args.threads)
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
        return EXIT_OK
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericalError, GullyError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        set_workers(1)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
