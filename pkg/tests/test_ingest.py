import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gullypost.ingest import (
    BarometerSeries,
    DemGrid,
    DomRaster,
    read_barometer_csv,
    read_dem_asc,
    read_dom_pgm,
    read_point_cloud,
    read_trajectory_csv,
    write_barometer_csv,
    write_dem_asc,
    write_dom_pgm,
    write_point_cloud,
    write_trajectory_csv,
)
from gullypost.model import ParseError, PointCloud, Trajectory

PLY_HEAD = "ply\nformat ascii 1.0\nelement vertex {n}\nproperty double x\nproperty double y\nproperty double z\nend_header\n"


def _write(tmp_path, name, text, mode="w"):
    p = tmp_path / name
    if mode == "w":
        p.write_text(text)
    else:
        p.write_bytes(text)
    return str(p)


def random_cloud(n, seed=0, colored=True):
    rng = np.random.default_rng(seed)
    xyz = rng.normal(scale=100, size=(n, 3))
    if not colored:
        return PointCloud(xyz)
    rgb = rng.integers(0, 256, (n, 3))
    flag = rng.random(n) < 0.7
    return PointCloud(xyz, np.where(flag[:, None], rgb, 0), flag)


# ---------------------------------------------------------------- PLY


def test_ply_single_point(tmp_path):
    c = read_point_cloud(_write(tmp_path, "a.ply", PLY_HEAD.format(n=1) + "0 0 0\n"))
    assert len(c) == 1
    assert np.array_equal(c.xyz, [[0, 0, 0]])
    assert not c.colored.any()


def test_ply_round_trip_1000_colored(tmp_path):
    c = random_cloud(1000)
    p = str(tmp_path / "c.ply")
    write_point_cloud(c, p)
    back = read_point_cloud(p)
    assert back.equals(c)
    assert np.array_equal(back.xyz, c.xyz)  # bit-exact at 17 digits


def test_ply_rewrite_byte_identical(tmp_path):
    c = random_cloud(300, seed=3)
    p1, p2 = str(tmp_path / "1.ply"), str(tmp_path / "2.ply")
    write_point_cloud(c, p1)
    write_point_cloud(read_point_cloud(p1), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_ply_uncolored_has_no_color_columns(tmp_path):
    p = str(tmp_path / "u.ply")
    write_point_cloud(random_cloud(5, colored=False), p)
    assert "red" not in open(p).read()


def test_ply_count_mismatch_reports_body_end(tmp_path):
    text = PLY_HEAD.format(n=5) + "0 0 0\n1 1 1\n2 2 2\n3 3 3\n"
    with pytest.raises(ParseError) as exc:
        read_point_cloud(_write(tmp_path, "bad.ply", text))
    # header is 7 lines, body lines 8..11, missing 5th vertex at line 12
    assert exc.value.line == 12
    assert "5" in str(exc.value)


@pytest.mark.parametrize(
    "body, line",
    [
        ("0 0 0\n1 x 1\n", 9),
        ("0 0 0\n1 1\n", 9),
        ("0 0 0\nnan 1 1\n", 9),
        ("0 0 0\ninf 1 1\n", 9),
    ],
)
def test_ply_bad_body_positioned(tmp_path, body, line):
    with pytest.raises(ParseError) as exc:
        read_point_cloud(_write(tmp_path, "b.ply", PLY_HEAD.format(n=2) + body))
    assert exc.value.line == line


@pytest.mark.parametrize(
    "text",
    [
        "",
        "plx\n",
        "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\n",
        "ply\nformat ascii 1.0\nelement vertex one\nend_header\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nend_header\n0\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar colored\n"
        "end_header\n0 0 0 300 0 0 1\n",
    ],
)
def test_ply_malformed_never_crashes(tmp_path, text):
    with pytest.raises(ParseError):
        read_point_cloud(_write(tmp_path, "m.ply", text))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.just(3)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_ply_round_trip_property(tmp_path_factory, xyz):
    p = str(tmp_path_factory.mktemp("ply") / "h.ply")
    write_point_cloud(PointCloud(xyz), p)
    assert np.array_equal(read_point_cloud(p).xyz, xyz)


# ---------------------------------------------------------------- CSV logs


def test_trajectory_two_samples(tmp_path):
    t = read_trajectory_csv(_write(tmp_path, "t.csv", "0,0,0,0\n1,1,0,0"))
    assert len(t) == 2
    assert np.array_equal(t.xyz[1], [1, 0, 0])


def test_trajectory_round_trip_100(tmp_path):
    rng = np.random.default_rng(1)
    t = Trajectory(np.cumsum(rng.uniform(0.01, 1, 100)), rng.normal(size=(100, 3)) * 1e3)
    p1, p2 = str(tmp_path / "1.csv"), str(tmp_path / "2.csv")
    write_trajectory_csv(t, p1)
    back = read_trajectory_csv(p1)
    assert np.array_equal(back.t, t.t) and np.array_equal(back.xyz, t.xyz)
    write_trajectory_csv(back, p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_trajectory_non_monotone(tmp_path):
    with pytest.raises(ParseError, match=r"timestamps not strictly increasing \(line 2\)") as exc:
        read_trajectory_csv(_write(tmp_path, "t.csv", "1,0,0,0\n1,1,0,0"))
    assert exc.value.line == 2


def test_trajectory_bad_row(tmp_path):
    with pytest.raises(ParseError) as exc:
        read_trajectory_csv(_write(tmp_path, "t.csv", "0,0,0,0\n1,1,0\n2,0,0,0\n"))
    assert exc.value.line == 2


def test_barometer_single(tmp_path):
    b = read_barometer_csv(_write(tmp_path, "b.csv", "0,101325"))
    assert len(b) == 1 and b.pressure[0] == 101325


def test_barometer_negative_pressure(tmp_path):
    with pytest.raises(ParseError) as exc:
        read_barometer_csv(_write(tmp_path, "b.csv", "0,101325\n1,-5\n"))
    assert exc.value.line == 2


def test_barometer_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    b = BarometerSeries(np.sort(rng.uniform(0, 100, 50)), rng.uniform(8e4, 1.1e5, 50))
    p1, p2 = str(tmp_path / "1.csv"), str(tmp_path / "2.csv")
    write_barometer_csv(b, p1)
    back = read_barometer_csv(p1)
    assert np.array_equal(back.t, b.t) and np.array_equal(back.pressure, b.pressure)
    write_barometer_csv(back, p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


# ---------------------------------------------------------------- DOM


def test_dom_georeferencing(tmp_path):
    pgm = _write(tmp_path, "d.pgm", "P2\n2 2\n255\n0 10\n20 30\n")
    wld = _write(tmp_path, "d.wld", "1.0\n0\n0\n-1.0\n0\n10\n")
    dom = read_dom_pgm(pgm, wld)
    assert dom.pixel_center(0, 0) == (0.5, 9.5)
    assert dom.width == 2 and dom.height == 2
    assert dom.values[1, 0] == 20


def test_dom_maxval_too_large(tmp_path):
    pgm = _write(tmp_path, "d.pgm", "P2\n1 1\n65535\n7\n")
    wld = _write(tmp_path, "d.wld", "1\n0\n0\n-1\n0\n0\n")
    with pytest.raises(ParseError, match="maxval"):
        read_dom_pgm(pgm, wld)


def test_dom_p5_equals_p2(tmp_path):
    pattern = ((np.arange(64).reshape(8, 8) * 37) % 256).astype(np.uint8)
    dom = DomRaster(pattern, 100.0, 200.0, 0.5)
    write_dom_pgm(dom, str(tmp_path / "a.pgm"), str(tmp_path / "a.wld"), binary=True)
    write_dom_pgm(dom, str(tmp_path / "b.pgm"), str(tmp_path / "b.wld"), binary=False)
    a = read_dom_pgm(str(tmp_path / "a.pgm"), str(tmp_path / "a.wld"))
    b = read_dom_pgm(str(tmp_path / "b.pgm"), str(tmp_path / "b.wld"))
    assert open(tmp_path / "a.pgm", "rb").read()[:2] == b"P5"
    assert np.array_equal(a.values, b.values) and np.array_equal(a.values, pattern)
    assert (a.origin_x, a.origin_y, a.cell) == (b.origin_x, b.origin_y, b.cell) == (100.0, 200.0, 0.5)


def test_dom_comments_and_errors(tmp_path):
    pgm = _write(tmp_path, "c.pgm", "P2\n# made by hand\n2 1\n# max\n255\n1 2\n")
    wld = _write(tmp_path, "c.wld", "2\n0\n0\n-2\n0\n0\n")
    assert np.array_equal(read_dom_pgm(pgm, wld).values, [[1, 2]])
    short = _write(tmp_path, "s.pgm", "P2\n2 2\n255\n1 2 3\n")
    with pytest.raises(ParseError):
        read_dom_pgm(short, wld)
    for bad in ("2\n0\n0\n-3\n0\n0\n", "2\n0.1\n0\n-2\n0\n0\n", "2\n0\n0\n"):
        w = _write(tmp_path, "bad.wld", bad)
        with pytest.raises(ParseError):
            read_dom_pgm(pgm, w)


# ---------------------------------------------------------------- DEM


def test_dem_single_cell(tmp_path):
    p = str(tmp_path / "d.asc")
    write_dem_asc(DemGrid([[5.0]], 0.0, 0.0, 0.1), p)
    lines = open(p).read().splitlines()
    assert [ln.split()[0] for ln in lines[:6]] == ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"]
    assert lines[5] == "NODATA_value -9999"
    assert lines[6] == "5.0"


def test_dem_all_nodata(tmp_path):
    p = str(tmp_path / "d.asc")
    write_dem_asc(DemGrid(np.full((2, 3), np.nan), 0.0, 0.0, 1.0), p)
    body = open(p).read().splitlines()[6:]
    assert body == ["-9999 -9999 -9999"] * 2


def _generic_asc(path):
    """Independent reader: header dict then whitespace floats."""
    head, rows = {}, []
    for line in open(path):
        tok = line.split()
        if tok and tok[0][0].isalpha():
            head[tok[0].lower()] = float(tok[1])
        elif tok:
            rows.append([float(v) for v in tok])
    z = np.array(rows)
    z[z == head["nodata_value"]] = np.nan
    return head, z


def test_dem_generic_reader(tmp_path):
    rng = np.random.default_rng(0)
    z = np.round(rng.uniform(-50, 50, (7, 5)), 1)
    z[2, 3] = np.nan
    p = str(tmp_path / "d.asc")
    write_dem_asc(DemGrid(z, 12.5, -3.0, 0.1), p)
    head, got = _generic_asc(p)
    assert head["ncols"] == 5 and head["nrows"] == 7
    assert head["xllcorner"] == 12.5 and head["yllcorner"] == -3.0 and head["cellsize"] == 0.1
    np.testing.assert_array_equal(got, z)
    back = read_dem_asc(p)
    np.testing.assert_array_equal(back.z, z)


def test_dem_rewrite_byte_identical(tmp_path):
    rng = np.random.default_rng(7)
    z = rng.uniform(0, 100, (20, 30))
    z[rng.random(z.shape) < 0.2] = np.nan
    p1, p2 = str(tmp_path / "1.asc"), str(tmp_path / "2.asc")
    write_dem_asc(DemGrid(z, 1000.3, 2000.7, 0.1), p1)
    write_dem_asc(read_dem_asc(p1), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


@pytest.mark.parametrize(
    "text",
    [
        "ncols 1\nnrows 1\nxllcorner 0\n",
        "ncols 1\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1\n",
        "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 x\n",
        "ncols 1\nnrows 1\nbogus 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1\n",
    ],
)
def test_dem_malformed(tmp_path, text):
    with pytest.raises(ParseError):
        read_dem_asc(_write(tmp_path, "m.asc", text))
