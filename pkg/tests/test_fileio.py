import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zerodensity.bundle import build_levi_civita_connection, curvature_from_holonomy
from zerodensity.errors import HolonomyMismatch, IOFailure, ParseError, ValidationError
from zerodensity.fileio import (
    RunConfig, csv_text, fmt, ply_text, rainbow, read_connection_csv, read_curvature_csv, read_field_csv,
)


@settings(max_examples=200)
@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x
    assert fmt(np.float64(x)) == fmt(x)


def test_csv_text():
    assert csv_text(["a", "b"], [(1, 0.1), (np.int64(2), np.float64(1 / 3))]) == "a,b\n1,0.1\n2,0.3333333333333333\n"


def test_rainbow_endpoints_and_constant():
    c = rainbow([0.0, 0.5, 1.0])
    np.testing.assert_array_equal(c[0], [0, 0, 255])
    np.testing.assert_array_equal(c[2], [255, 0, 0])
    np.testing.assert_array_equal(c[1], [0, 255, 0])
    flat = rainbow(np.full(7, 3.2))
    assert np.all(flat == flat[0]) and list(flat[0]) == [0, 255, 0]


def test_ply_layout(ico):
    txt = ply_text(ico, np.arange(20.0))
    lines = txt.splitlines()
    end = lines.index("end_header")
    assert lines[0] == "ply" and "element face 20" in lines
    faces = lines[end + 1 + 12:]
    assert len(faces) == 20
    first = faces[0].split()
    assert first[0] == "3" and first[4:] == ["0", "0", "255"]


def test_connection_and_curvature_files(tmp_path, ico):
    conn = build_levi_civita_connection(ico)
    cur = curvature_from_holonomy(ico, conn)
    rows = [(int(j), int(i), z.real, -z.imag) for (i, j), z in zip(ico.edges, conn.r)]  # reversed directions
    p = tmp_path / "c.csv"
    p.write_text(csv_text(["i", "j", "re", "im"], rows))
    back = read_connection_csv(p, ico)
    np.testing.assert_array_equal(back.r, conn.r)
    q = tmp_path / "o.csv"
    q.write_text(csv_text(["face", "omega"], [(f, w + (2 * np.pi if f == 0 else 0)) for f, w in enumerate(cur.omega)]))
    ext = read_curvature_csv(q, back)
    assert ext.omega[0] == pytest.approx(cur.omega[0] + 2 * np.pi)
    q.write_text(csv_text(["face", "omega"], [(f, w + 0.1) for f, w in enumerate(cur.omega)]))
    with pytest.raises(HolonomyMismatch):
        read_curvature_csv(q, back)
    p.write_text(csv_text(["i", "j", "re", "im"], rows[:-1]))
    with pytest.raises(ValidationError):
        read_connection_csv(p, ico)
    p.write_text("i,j,re,im\n0,3,1,0\n")
    with pytest.raises(ParseError):
        read_connection_csv(p, ico)
    with pytest.raises(IOFailure):
        read_connection_csv(tmp_path / "missing.csv", ico)


def test_field_selection(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text(csv_text(["face", "t", "I", "P"], [(f, t, 10 * t + f, -f) for t in (0.0, 0.5) for f in range(3)]))
    np.testing.assert_array_equal(read_field_csv(p, 3), [0, -1, -2])
    np.testing.assert_array_equal(read_field_csv(p, 3, "I", 0.0), [0, 1, 2])
    np.testing.assert_array_equal(read_field_csv(p, 3, "I"), [5, 6, 7])
    with pytest.raises(ValidationError):
        read_field_csv(p, 3, "I", 0.25)
    with pytest.raises(ValidationError):
        read_field_csv(p, 4)
    with pytest.raises(ParseError):
        read_field_csv(p, 3, "nope")


def test_config_parse_dump_and_resolve(tmp_path):
    cfg = RunConfig.parse("mesh = m.obj  # comment\nk = 20\ntimes = 0, 1;10\ntime_unit = lambda2\nply = no\n",
                          base=tmp_path)
    assert cfg.mesh == str(tmp_path / "m.obj") and cfg.output == str(tmp_path / "out")
    assert cfg.k == 20 and cfg.ply is False and cfg.time_list() == [0.0, 1.0, 10.0]
    again = RunConfig.parse(cfg.dump())
    assert again == cfg
    with pytest.raises(ValidationError):
        RunConfig.parse("bogus = 1")
    with pytest.raises(ParseError):
        RunConfig.parse("mesh m.obj")
    with pytest.raises(ValidationError):
        RunConfig.parse("k = two")
    for bad in ("k = -1", "growth = 1", "t_max = -3", "time_unit = hours", "samples = 0", "times = 1, x"):
        with pytest.raises(ValidationError):
            RunConfig.parse("mesh = a.obj\n" + bad).validate()
    with pytest.raises(ValidationError):
        RunConfig().validate()
