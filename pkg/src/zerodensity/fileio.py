"""CSV and PLY reading/writing, run configuration."""

from __future__ import annotations

import colorsys
import csv
import dataclasses
import io
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .bundle import Connection, Curvature
from .errors import IOFailure, ParseError, ValidationError
from .mesh import SurfaceMesh


def fmt(x) -> str:
    """Shortest round-trip decimal form of a number."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (int, float, np.integer, np.floating)) else v for v in row])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def _rows(text):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    return [[c.strip() for c in r] for r in rows]


def read_connection_csv(path, mesh: SurfaceMesh) -> Connection:
    """Connection from rows ``i,j,re,im`` (0-based directed edges).

    Each edge must be listed in at least one direction; when both are
    listed they must be conjugate.
    """
    r = np.full(mesh.n_edges, np.nan, dtype=complex)
    for no, row in enumerate(_rows(read_text(path)), 1):
        if row[:4] == ["i", "j", "re", "im"]:
            continue
        try:
            if len(row) != 4:
                raise ValueError("expected i,j,re,im")
            i, j = int(row[0]), int(row[1])
            z = complex(float(row[2]), float(row[3]))
            e, s = mesh.find_edge(i, j)
        except (ValueError, KeyError) as exc:
            raise ParseError(f"{path}:{no}: {exc}") from None
        z = z if s > 0 else np.conj(z)
        if not np.isnan(r[e]) and abs(r[e] - z) > 1e-12:
            raise ValidationError(f"{path}:{no}: both directions of edge ({i}, {j}) given inconsistently")
        r[e] = z
    if np.any(np.isnan(r)):
        e = int(np.argmax(np.isnan(r)))
        raise ValidationError(f"{path}: no value for edge {tuple(mesh.edges[e])}")
    return Connection(mesh, r)


def read_curvature_csv(path, connection: Connection) -> Curvature:
    """Curvature from rows ``face,omega``; checked against the holonomy."""
    om = np.full(connection.mesh.n_faces, np.nan)
    for no, row in enumerate(_rows(read_text(path)), 1):
        if row[:2] == ["face", "omega"]:
            continue
        try:
            om[int(row[0])] = float(row[1])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}:{no}: {exc}") from None
    if np.any(np.isnan(om)):
        raise ValidationError(f"{path}: missing curvature for face {int(np.argmax(np.isnan(om)))}")
    return Curvature.external(connection, om)


def read_field_csv(path, n_faces: int, column: str | None = None, t: float | None = None) -> np.ndarray:
    """Per-face values from a CSV with a ``face`` column.

    ``column`` defaults to the last column.  When the file has a ``t``
    column, ``t`` selects the rows (default: the largest ``t``).
    """
    rows = _rows(read_text(path))
    if not rows or "face" not in rows[0]:
        raise ParseError(f"{path}: header with a 'face' column required")
    head, body = rows[0], rows[1:]
    col = head[-1] if column is None else column
    if col not in head:
        raise ParseError(f"{path}: no column {col!r}")
    fi, ci = head.index("face"), head.index(col)
    if "t" in head:
        ti = head.index("t")
        ts = sorted({float(r[ti]) for r in body})
        want = ts[-1] if t is None else float(t)
        if want not in ts:
            raise ValidationError(f"{path}: t={want!r} not present")
        body = [r for r in body if float(r[ti]) == want]
    vals = np.full(n_faces, np.nan)
    try:
        for r in body:
            vals[int(r[fi])] = float(r[ci])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if np.any(np.isnan(vals)):
        raise ValidationError(f"{path}: field does not cover every face of the mesh")
    return vals


def rainbow(values, guard: float = 1e-15) -> np.ndarray:
    """uint8 RGB per value: minimum blue, maximum red, hue linear in between.

    A field whose range is below ``guard`` gets the middle colour.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    s = np.full(v.shape, 0.5) if hi - lo < guard else (v - lo) / (hi - lo)
    rgb = np.array([colorsys.hsv_to_rgb((2.0 / 3.0) * (1.0 - x), 1.0, 1.0) for x in s.ravel()])
    return np.rint(255 * rgb).astype(np.uint8).reshape(v.shape + (3,))


def ply_text(mesh: SurfaceMesh, values) -> str:
    """ASCII PLY with per-face ``uchar red green blue`` colours."""
    col = rainbow(values)
    out = ["ply", "format ascii 1.0", f"element vertex {mesh.n_vertices}",
           "property double x", "property double y", "property double z",
           f"element face {mesh.n_faces}", "property list uchar int vertex_indices",
           "property uchar red", "property uchar green", "property uchar blue", "end_header"]
    out += [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    out += [f"3 {a} {b} {c} {r} {g} {bl}" for (a, b, c), (r, g, bl) in zip(mesh.faces.tolist(), col.tolist())]
    return "\n".join(out) + "\n"


def write_ply(path, mesh: SurfaceMesh, values) -> None:
    write_text(path, ply_text(mesh, values))


# -- run configuration ------------------------------------------------------------

@dataclass
class RunConfig:
    """Flat key=value run configuration.

    ``k = 0`` selects the full dense eigenbasis.  Empty ``t0`` / ``t_max``
    mean automatic.  ``times`` lists the times for PLY export and Monte
    Carlo runs; with ``time_unit = lambda2`` they are multiples of
    ``1 / lambda_2``.
    """

    mesh: str = ""
    connection: str = "levi-civita"
    curvature: str = "holonomy"
    k: int = 0
    tol: float = 1e-9
    t0: str = ""
    growth: float = 1.25
    t_max: str = ""
    times: str = ""
    time_unit: str = "absolute"
    samples: int = 10000
    seed: int = 0
    workers: int = 1
    output: str = "out"
    ply: bool = True

    def validate(self) -> "RunConfig":
        if not self.mesh:
            raise ValidationError("config: 'mesh' is required")
        if self.k < 0:
            raise ValidationError("config: k must be >= 0 (0 = full basis)")
        if self.growth <= 1:
            raise ValidationError("config: growth must be > 1")
        for key in ("t0", "t_max"):
            v = getattr(self, key)
            if v and float(v) <= 0:
                raise ValidationError(f"config: {key} must be positive")
        if self.time_unit not in ("absolute", "lambda2"):
            raise ValidationError("config: time_unit must be 'absolute' or 'lambda2'")
        if self.samples < 1 or self.workers < 1:
            raise ValidationError("config: samples and workers must be >= 1")
        self.time_list()
        return self

    def time_list(self) -> list[float]:
        try:
            ts = [float(x) for x in self.times.replace(";", ",").split(",") if x.strip()]
        except ValueError:
            raise ValidationError(f"config: cannot parse times {self.times!r}") from None
        if any(t < 0 for t in ts):
            raise ValidationError("config: times must be >= 0")
        return ts

    def set(self, key: str, value: str) -> None:
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ValidationError(f"config: unknown key {key!r}")
        kind = type(getattr(RunConfig(), key))
        try:
            if kind is bool:
                low = value.strip().lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                val = low in ("true", "1", "yes")
            else:
                val = kind(value.strip())
        except ValueError:
            raise ValidationError(f"config: bad value {value!r} for {key}") from None
        setattr(self, key, val)

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, base: Path | None = None) -> "RunConfig":
        cfg = cls()
        for no, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"config line {no}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            cfg.set(key, val)
        if base is not None:
            cfg = cfg.resolve(base)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.parse(read_text(path), Path(path).resolve().parent)

    def resolve(self, base: Path) -> "RunConfig":
        """Make relative paths relative to ``base``."""
        c = dataclasses.replace(self)

        def fix(p):
            return p if not p or Path(p).is_absolute() else str(base / p)

        c.mesh = fix(c.mesh)
        c.output = fix(c.output)
        if c.connection != "levi-civita":
            c.connection = fix(c.connection)
        if c.curvature != "holonomy":
            c.curvature = fix(c.curvature)
        return c
