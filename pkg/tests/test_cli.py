import filecmp
import json
import os

import numpy as np
import pytest

from gullypost.cli import run
from gullypost.config import PipelineConfig
from gullypost.ingest import read_dem_asc, read_point_cloud, read_trajectory_csv
from gullypost.pipeline import run_correction
from gullypost.synthbench import read_bundle


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    d = tmp_path_factory.mktemp("bundle")
    code = run(["synth", "--out", str(d), "--density", "0.5", "--fh", "1.15", "--fe", "0.9",
                "--noise", "0.05", "--baro-noise", "10"])
    assert code == 0
    return d


@pytest.fixture(scope="module")
def piped(bundle, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run(["pipeline", "--bundle", str(bundle), "--out", str(out), "--no-figures"]) == 0
    return out


def test_unknown_flag_is_usage_error(capsys):
    assert run(["dem", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "usage:" in err


def test_unknown_command(capsys):
    assert run(["frobnicate"]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_input_is_parse_error(tmp_path, capsys):
    assert run(["dem", "--map", str(tmp_path / "none.ply"), "--out", str(tmp_path / "d.asc")]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_non_monotone_trajectory_names_line(bundle, tmp_path, capsys):
    lines = open(bundle / "trajectory.csv").read().splitlines()
    lines[5], lines[6] = lines[6], lines[5]
    bad = tmp_path / "traj.csv"
    bad.write_text("\n".join(lines) + "\n")
    code = run(["correct", "--map", str(bundle / "map.ply"), "--trajectory", str(bad),
                "--dom", str(bundle / "dom.pgm"), "--baro", str(bundle / "baro.csv"), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "traj.csv:7:" in err


def test_unknown_config_key(bundle, tmp_path):
    assert run(["dem", "--map", str(bundle / "map.ply"), "--out", str(tmp_path / "d.asc"), "--set", "zzz=1"]) == 1


def test_pipeline_outputs(piped):
    for name in ("corrected_map.ply", "smoothed_map.ply", "dem.asc", "report.tsv", "volume.tsv", "manifest.json"):
        assert (piped / name).exists(), name
    assert any(n.endswith(".csv") for n in os.listdir(piped / "sections"))
    rows = dict(line.split("\t") for line in open(piped / "report.tsv").read().splitlines())
    assert float(rows["corrected_endpoint_bias"]) < float(rows["input_endpoint_bias"]) / 5


def test_manifest_factors_match_correction(bundle, piped):
    man = json.load(open(piped / "manifest.json"))
    cloud, traj, dom, baro, _ = read_bundle(bundle)
    res = run_correction(cloud, traj, dom, baro, PipelineConfig())
    assert man["f_h"] == res.factors.f_h and man["f_e"] == res.factors.f_e
    corr = read_trajectory_csv(str(piped / "corrected_trajectory.csv"))
    assert np.array_equal(corr.xyz, traj.xyz * np.array([man["f_h"], man["f_h"], man["f_e"]]))
    assert man["config_sha256"] == PipelineConfig().digest()


def test_pipeline_deterministic_across_threads(bundle, piped, tmp_path):
    out = tmp_path / "t4"
    assert run(["pipeline", "--bundle", str(bundle), "--out", str(out), "--no-figures", "--threads", "4"]) == 0
    cmp = filecmp.dircmp(piped, out)
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for sub in cmp.subdirs.values():
        assert not sub.diff_files


def test_stage_commands(bundle, piped, tmp_path, capsys):
    m = str(piped / "corrected_map.ply")
    assert run(["smooth", "--map", m, "--out", str(tmp_path / "s.ply")]) == 0
    assert len(read_point_cloud(str(tmp_path / "s.ply"))) == len(read_point_cloud(m))
    assert run(["recolor", "--map", m, "--out", str(tmp_path / "c.ply")]) == 0
    assert run(["dem", "--map", m, "--out", str(tmp_path / "a.asc"), "--set", "dem_cell=1.0"]) == 0
    assert read_dem_asc(str(tmp_path / "a.asc")).cellsize == 1.0
    assert run(["diff", "--a", str(tmp_path / "a.asc"), "--b", str(tmp_path / "a.asc"), "--out", str(tmp_path / "z.asc")]) == 0
    assert "0.0" in capsys.readouterr().out
    assert run(["xsect", "--map", m, "--anchors", str(piped / "anchors.csv"), "--units", "200",
                "--out", str(tmp_path / "x")]) == 0
    assert run(["xsect", "--map", m, "--anchors", str(piped / "anchors.csv"), "--units", "0",
                "--out", str(tmp_path / "y")]) == 1


def test_volume_components(capsys):
    assert run(["volume", "--component", "trapezoidal=661", "--component", "triangular=504"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "TOTAL\t1165.0"


def test_volume_areas(tmp_path, capsys):
    p = tmp_path / "a.txt"
    p.write_text("0\n10\n")
    assert run(["volume", "--areas", str(p), "--spacing", "4"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "TOTAL\t20.0"


def test_eval(bundle, piped, capsys):
    assert run(["eval", "--trajectory", str(piped / "corrected_trajectory.csv"), "--baro", str(bundle / "baro.csv"),
                "--truth", str(bundle / "truth.json")]) == 0
    assert "endpoint_bias" in capsys.readouterr().out
