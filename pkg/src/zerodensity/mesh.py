"""Closed oriented triangle meshes and their scalar geometry.

A :class:`SurfaceMesh` is validated once at construction (closedness,
orientability, degenerate faces) and is immutable afterwards.  Geometry
tables (areas, corner angles, cotan weights, barycentric dual areas) are
computed lazily and cached.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DegenerateFace, IOFailure, NonOrientable, NotClosed, ParseError

#: relative degenerate-face threshold, in units of the squared bbox diagonal
AREA_EPS = 1e-12


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GeometryTables:
    """Per-element measures of a mesh.

    Attributes
    ----------
    face_area : ndarray, shape (F,)
    dual_area : ndarray, shape (n,)
        Barycentric dual areas, one third of the incident face areas.
    cotan_weight : ndarray, shape (E,)
        ``0.5 * (cot alpha + cot beta)`` per undirected edge; may be negative.
    corner_angle : ndarray, shape (F, 3)
        Interior angle at each face corner.
    """

    face_area: np.ndarray
    dual_area: np.ndarray
    cotan_weight: np.ndarray
    corner_angle: np.ndarray

    @property
    def total_area(self) -> float:
        return float(self.face_area.sum())


class SurfaceMesh:
    """Closed, consistently oriented triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like, shape (F, 3)
        0-based vertex indices.  Windings are repaired to a consistent
        orientation (outward, by signed volume) when ``repair`` is true.
    repair : bool
        If false, inconsistent windings raise :class:`NonOrientable` instead
        of being flipped.

    Attributes
    ----------
    edges : ndarray, shape (E, 2)
        Undirected edges with ``edges[e, 0] < edges[e, 1]``.
    edge_faces : ndarray, shape (E, 2)
        The two faces incident to each edge.
    face_edges : ndarray, shape (F, 3)
        Edge id of half-edge ``c`` of each face, running from corner ``c``
        to corner ``c + 1``.
    face_edge_sign : ndarray, shape (F, 3)
        +1 where that half-edge runs along the stored edge direction, else -1.
    """

    def __init__(self, vertices, faces, *, repair: bool = True):
        v = np.asarray(vertices, dtype=float)
        f = np.asarray(faces)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
            raise ParseError("vertices must have shape (n, 3)")
        if not np.all(np.isfinite(v)):
            raise ParseError("vertex coordinates must be finite")
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise ParseError("faces must have shape (F, 3)")
        if not np.issubdtype(f.dtype, np.integer):
            if not np.all(np.equal(np.mod(f, 1), 0)):
                raise ParseError("face indices must be integers")
        f = f.astype(np.int64)
        n = len(v)
        if f.min() < 0 or f.max() >= n:
            raise ParseError("face index out of range")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ParseError("face with repeated vertex index")

        self._build_edges(f, n)
        f = self._orient(f, v, repair)
        self.vertices = _frozen(v)
        self.faces = _frozen(f)
        self._build_edges(f, n)  # recompute with final windings
        self._check_areas()

    # -- construction helpers ---------------------------------------------
    def _build_edges(self, f, n):
        src = f
        dst = np.roll(f, -1, axis=1)
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        key = (lo * n + hi).ravel()
        uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
        if np.any(counts != 2):
            bad = uniq[counts != 2][0]
            raise NotClosed(
                f"edge ({bad // n}, {bad % n}) has {counts[counts != 2][0]} incident faces, expected 2"
            )
        order = np.argsort(inv, kind="stable")
        hf = order // 3
        self.edges = _frozen(np.stack([uniq // n, uniq % n], axis=1))
        self.edge_faces = _frozen(hf.reshape(-1, 2))
        self.face_edges = _frozen(inv.reshape(-1, 3))
        self.face_edge_sign = _frozen(np.where(src < dst, 1, -1).astype(np.int8))
        self._halfedge_order = order

    def _orient(self, f, v, repair):
        F = len(f)
        sign = self.face_edge_sign.ravel()
        order = self._halfedge_order
        h1, h2 = order[0::2], order[1::2]
        fa, fb = h1 // 3, h2 // 3
        # the two faces of an edge must traverse it in opposite directions
        same = sign[h1] == sign[h2]
        if not repair:
            if np.any(same):
                raise NonOrientable("inconsistent face windings")
            flip = np.zeros(F, dtype=bool)
            comp = self._components(fa, fb, F)
        else:
            adj = [[] for _ in range(F)]
            for a, b, s in zip(fa.tolist(), fb.tolist(), same.tolist()):
                adj[a].append((b, s))
                adj[b].append((a, s))
            flip = np.full(F, -1, dtype=np.int8)
            comp = np.full(F, -1, dtype=np.int64)
            ncomp = 0
            for root in range(F):
                if flip[root] >= 0:
                    continue
                flip[root] = 0
                comp[root] = ncomp
                queue = deque([root])
                while queue:
                    a = queue.popleft()
                    for b, s in adj[a]:
                        want = flip[a] ^ int(s)
                        if flip[b] < 0:
                            flip[b] = want
                            comp[b] = ncomp
                            queue.append(b)
                        elif flip[b] != want:
                            raise NonOrientable(f"no consistent winding (conflict at face {b})")
                ncomp += 1
            flip = flip.astype(bool)
        f = f.copy()
        f[flip] = f[flip][:, ::-1]
        # make each component outward by signed volume
        p = v[f]
        vol = np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2]))
        cv = np.bincount(comp, weights=vol)
        inward = cv[comp] < 0
        f[inward] = f[inward][:, ::-1]
        self.orientation_repaired = bool(np.any(flip ^ inward))
        return f

    @staticmethod
    def _components(fa, fb, F):
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        g = coo_matrix((np.ones(len(fa)), (fa, fb)), shape=(F, F))
        return connected_components(g, directed=False)[1]

    def _check_areas(self):
        area = self.geometry.face_area
        eps = AREA_EPS * self.bbox_diagonal**2
        bad = np.nonzero(area < eps)[0]
        if len(bad):
            raise DegenerateFace(f"face {bad[0]} has area {area[bad[0]]:.3e} below {eps:.3e}")

    # -- basic properties ---------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def edge_index(self) -> dict:
        """Map ``(i, j)`` with ``i < j`` to the edge id."""
        return {(int(a), int(b)): e for e, (a, b) in enumerate(self.edges)}

    def find_edge(self, i: int, j: int) -> tuple[int, int]:
        """Return ``(edge id, sign)`` of the directed edge ``i -> j``."""
        key = (i, j) if i < j else (j, i)
        try:
            e = self.edge_index[key]
        except KeyError:
            raise KeyError(f"({i}, {j}) is not an edge") from None
        return e, (1 if i < j else -1)

    @cached_property
    def face_centroids(self) -> np.ndarray:
        return _frozen(self.vertices[self.faces].mean(axis=1))

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit face normals following the winding."""
        p = self.vertices[self.faces]
        c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return _frozen(c / np.linalg.norm(c, axis=1, keepdims=True))

    @cached_property
    def geometry(self) -> GeometryTables:
        return compute_geometry(self)

    def scaled(self, s: float) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices * s, self.faces, repair=False)

    def __repr__(self):
        return f"SurfaceMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


def compute_geometry(mesh: SurfaceMesh) -> GeometryTables:
    """Vectorized face areas, corner angles, cotan weights and dual areas."""
    p = mesh.vertices[mesh.faces]  # (F, 3, 3)
    # vectors from corner c to the other two corners
    u = np.roll(p, -1, axis=1) - p
    w = np.roll(p, -2, axis=1) - p
    cr = np.linalg.norm(np.cross(u, w), axis=2)
    dot = np.einsum("fck,fck->fc", u, w)
    angle = np.arctan2(cr, dot)
    with np.errstate(divide="ignore", invalid="ignore"):  # degenerate faces are rejected later
        cot = dot / cr
    area = 0.5 * cr[:, 0]

    # half-edge c (corner c -> c+1) is opposite corner c+2
    cot_opp = np.roll(cot, -2, axis=1)
    wgt = 0.5 * np.bincount(mesh.face_edges.ravel(), weights=cot_opp.ravel(), minlength=mesh.n_edges)
    dual = np.bincount(mesh.faces.ravel(), weights=np.repeat(area / 3.0, 3), minlength=mesh.n_vertices)
    return GeometryTables(_frozen(area), _frozen(dual), _frozen(wgt), _frozen(angle))


def corner_angle(mesh: SurfaceMesh, face: int, corner: int) -> float:
    """Interior angle at ``corner`` (0, 1 or 2) of ``face``."""
    if not 0 <= corner < 3:
        raise IndexError("corner must be 0, 1 or 2")
    return float(mesh.geometry.corner_angle[face, corner])


def cotan_weight(mesh: SurfaceMesh, edge) -> float:
    """Cotan weight of an edge given as an id or a vertex pair."""
    if isinstance(edge, (tuple, list)):
        edge = mesh.find_edge(int(edge[0]), int(edge[1]))[0]
    return float(mesh.geometry.cotan_weight[edge])


def face_area(mesh: SurfaceMesh, face: int) -> float:
    return float(mesh.geometry.face_area[face])


def dual_area(mesh: SurfaceMesh, vertex: int) -> float:
    return float(mesh.geometry.dual_area[vertex])


# -- file formats -------------------------------------------------------------

def _read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from exc


def parse_obj(text: str):
    """Parse ``v`` and ``f`` records of a Wavefront OBJ file.

    Other record types are ignored.  Faces must be triangles; ``a/b/c``
    tokens and negative (relative) indices are accepted.
    """
    verts, faces = [], []
    for no, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "v":
                if len(parts) < 4:
                    raise ValueError("vertex needs 3 coordinates")
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(f"expected a triangle, got {len(idx)} vertices")
                nv = len(verts)
                faces.append([i - 1 if i > 0 else nv + i for i in idx])
                if any(i == 0 for i in idx):
                    raise ValueError("OBJ indices are 1-based")
        except ValueError as exc:
            raise ParseError(f"line {no}: {exc}") from None
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def parse_mesh_csv(text: str):
    """Parse the CSV mesh format: ``v,x,y,z`` and ``f,i,j,k`` rows (0-based)."""
    verts, faces = [], []
    for no, line in enumerate(text.splitlines(), 1):
        row = [c.strip() for c in line.split(",")]
        if row == [""] or row in (["v", "x", "y", "z"], ["f", "i", "j", "k"]):
            continue
        try:
            if len(row) != 4:
                raise ValueError("expected 4 fields")
            if row[0] == "v":
                verts.append([float(x) for x in row[1:]])
            elif row[0] == "f":
                faces.append([int(x) for x in row[1:]])
            else:
                raise ValueError(f"unknown record {row[0]!r}")
        except ValueError as exc:
            raise ParseError(f"line {no}: {exc}") from None
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, *, repair: bool = True) -> SurfaceMesh:
    """Load a closed triangle mesh from an OBJ or CSV file.

    The format is chosen by extension (``.csv`` for the CSV format,
    anything else is read as OBJ).
    """
    text = _read_text(path)
    if str(path).lower().endswith(".csv"):
        v, f = parse_mesh_csv(text)
    else:
        v, f = parse_obj(text)
    return SurfaceMesh(v, f, repair=repair)


def write_obj(mesh: SurfaceMesh, path) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    _write_text(path, "\n".join(lines) + "\n")


def write_mesh_csv(mesh: SurfaceMesh, path) -> None:
    lines = ["v,x,y,z"] + [f"v,{x!r},{y!r},{z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += ["f,i,j,k"] + [f"f,{a},{b},{c}" for a, b, c in mesh.faces.tolist()]
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror or exc}") from exc
