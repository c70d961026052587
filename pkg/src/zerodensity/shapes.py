"""Small closed test surfaces: platonic solids, icospheres, ellipsoids, cubes."""

from __future__ import annotations

import numpy as np

from .mesh import SurfaceMesh


def tetrahedron(edge: float = 1.0) -> SurfaceMesh:
    """Regular tetrahedron with the given edge length."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    v *= edge / (2 * np.sqrt(2))
    f = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return SurfaceMesh(v, f)


def _icosahedron_arrays():
    g = (1 + np.sqrt(5)) / 2
    v = np.array(
        [[-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
         [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
         [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1]],
        dtype=float,
    )
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosahedron() -> SurfaceMesh:
    """Regular icosahedron inscribed in the unit sphere."""
    return SurfaceMesh(*_icosahedron_arrays())


def _subdivide(v, f):
    cache = {}
    verts = list(v)

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            m = verts[a] + verts[b]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    out = []
    for a, b, c in f.tolist():
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts), np.array(out)


def icosphere(level: int = 1, radius: float = 1.0) -> SurfaceMesh:
    """Icosahedron refined ``level`` times by midpoint subdivision.

    Level ``L`` has ``10 * 4**L + 2`` vertices and ``20 * 4**L`` faces.
    """
    v, f = _icosahedron_arrays()
    for _ in range(level):
        v, f = _subdivide(v, f)
    return SurfaceMesh(radius * v, f)


def ellipsoid(axes=(1.8, 1.0, 0.6), level: int = 3) -> SurfaceMesh:
    """Icosphere stretched along the coordinate axes.

    The default axes give a triaxial ellipsoid whose lowest connection
    eigenvalue is simple.
    """
    s = icosphere(level)
    return SurfaceMesh(s.vertices * np.asarray(axes, dtype=float), s.faces)


def _cube_grid(n):
    """Vertices and outward triangles of a cube surface with an n x n grid per side."""
    idx = {}
    verts = []

    def vid(p):
        key = tuple(int(round(c)) for c in p)
        if key not in idx:
            idx[key] = len(verts)
            verts.append(key)
        return idx[key]

    faces = []
    for axis in range(3):
        for side in (-1, 1):
            # (a, b) spans the side with a x b pointing outward
            a, b = (axis + 1) % 3, (axis + 2) % 3
            if side < 0:
                a, b = b, a
            for i in range(n):
                for j in range(n):
                    def P(u, w):
                        p = [0, 0, 0]
                        p[axis] = side * n
                        p[a] = 2 * u - n
                        p[b] = 2 * w - n
                        return vid(p)
                    q00, q10, q11, q01 = P(i, j), P(i + 1, j), P(i + 1, j + 1), P(i, j + 1)
                    faces += [[q00, q10, q11], [q00, q11, q01]]
    return np.array(verts, dtype=float) / n, np.array(faces)


def box(n: int = 2, size=(1.0, 1.0, 1.0)) -> SurfaceMesh:
    """Axis-aligned box whose sides are split into n x n grids of squares."""
    v, f = _cube_grid(n)
    return SurfaceMesh(v * 0.5 * np.asarray(size, dtype=float), f)


def cubed_ellipsoid(n: int = 4, axes=(1.8, 1.0, 0.6)) -> SurfaceMesh:
    """Cube grid projected to the unit sphere, then stretched.

    Has ``12 * n**2`` faces; ``n = 4`` gives 192.
    """
    v, f = _cube_grid(n)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    return SurfaceMesh(v * np.asarray(axes, dtype=float), f)
