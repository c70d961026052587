"""Discrete hermitian line bundles: connection, curvature, degree, transport.

Sections are stored as complex coefficients with respect to an implicit
non-vanishing base section.  The connection maps the fibre at ``i`` to the
fibre at ``j`` by ``z -> r_ij * z`` with ``|r_ij| = 1`` and
``r_ji = conj(r_ij)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchBoundary,
    DisconnectedPath,
    HolonomyMismatch,
    NotInteger,
    ValidationError,
    ZeroNormal,
    ZeroProjection,
)
from .mesh import SurfaceMesh

UNIT_TOL = 1e-12
HOLONOMY_TOL = 1e-9
BRANCH_MARGIN = 1e-6
INTEGER_TOL = 1e-6


class Connection:
    """Unit complex transport factor per edge.

    Parameters
    ----------
    mesh : SurfaceMesh
    r : array_like of complex, shape (E,)
        Value for the stored direction ``mesh.edges[e, 0] -> mesh.edges[e, 1]``.
        The reverse direction is the conjugate.
    """

    def __init__(self, mesh: SurfaceMesh, r):
        r = np.array(r, dtype=complex)
        if r.shape != (mesh.n_edges,):
            raise ValidationError(f"need one value per edge ({mesh.n_edges}), got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValidationError("connection values must be finite")
        dev = np.abs(np.abs(r) - 1.0)
        if np.any(dev > UNIT_TOL):
            e = int(np.argmax(dev))
            raise ValidationError(f"connection value on edge {e} is not unit modulus (|r|-1 = {dev[e]:.2e})")
        r.setflags(write=False)
        self.mesh = mesh
        self.r = r

    @classmethod
    def trivial(cls, mesh: SurfaceMesh) -> "Connection":
        return cls(mesh, np.ones(mesh.n_edges, dtype=complex))

    @classmethod
    def from_angles(cls, mesh: SurfaceMesh, angles) -> "Connection":
        """Connection ``exp(i * angle)`` per stored edge direction."""
        return cls(mesh, np.exp(1j * np.asarray(angles, dtype=float)))

    def value(self, i: int, j: int) -> complex:
        """Transport factor of the directed edge ``i -> j``."""
        e, s = self.mesh.find_edge(i, j)
        return complex(self.r[e] if s > 0 else np.conj(self.r[e]))

    def halfedge_values(self) -> np.ndarray:
        """Transport factors along each face's half-edges, shape (F, 3)."""
        r = self.r[self.mesh.face_edges]
        return np.where(self.mesh.face_edge_sign > 0, r, np.conj(r))

    def holonomy(self) -> np.ndarray:
        """Product ``r_ki r_jk r_ij`` around every face."""
        h = self.halfedge_values()
        return h[:, 0] * h[:, 1] * h[:, 2]

    def gauge(self, g) -> "Connection":
        """Express the connection in the base section ``g_i X_i``.

        ``g`` must have unit modulus.  Coefficients change as ``z -> z / g``
        and transport factors as ``r_ij -> r_ij g_i / g_j``.
        """
        g = np.asarray(g, dtype=complex)
        a, b = self.mesh.edges[:, 0], self.mesh.edges[:, 1]
        return Connection(self.mesh, self.r * g[a] / g[b])


def vertex_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Area-weighted vertex normals (unit length)."""
    p = mesh.vertices[mesh.faces]
    c = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    nrm = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(nrm, mesh.faces[:, k], c)
    size = np.linalg.norm(nrm, axis=1)
    scale = np.zeros(mesh.n_vertices)
    np.add.at(scale, mesh.faces.ravel(), np.repeat(np.linalg.norm(c, axis=1), 3))
    bad = np.nonzero(size <= 1e-12 * scale)[0]
    if len(bad):
        raise ZeroNormal(f"vertex normal vanishes at vertex {bad[0]}")
    return nrm / size[:, None]


def _frame_angles(mesh: SurfaceMesh, normals: np.ndarray) -> np.ndarray:
    """Angle of every half-edge in the tangent frame of its tail vertex.

    The frame at vertex ``i`` has its first axis along the projection of the
    first outgoing half-edge in storage order whose projection is not tiny.
    """
    F = mesh.n_faces
    src = mesh.faces.ravel()
    dst = np.roll(mesh.faces, -1, axis=1).ravel()
    d = mesh.vertices[dst] - mesh.vertices[src]
    nv = normals[src]
    proj = d - np.einsum("ij,ij->i", d, nv)[:, None] * nv
    plen = np.linalg.norm(proj, axis=1)
    ok = plen >= 1e-8 * np.linalg.norm(d, axis=1)

    e1 = np.full((mesh.n_vertices, 3), np.nan)
    order = np.lexsort((np.arange(3 * F), src))  # by vertex, then storage order
    s_sorted = src[order]
    good = order[ok[order]]
    first = np.unique(s_sorted[ok[order]], return_index=True)
    e1[first[0]] = proj[good[first[1]]] / plen[good[first[1]], None]
    missing = np.nonzero(np.isnan(e1[:, 0]))[0]
    if len(missing):
        raise ZeroProjection(f"no usable reference edge at vertex {missing[0]}")
    usable = plen >= 1e-12 * np.linalg.norm(d, axis=1)
    if not np.all(usable):
        h = int(np.nonzero(~usable)[0][0])
        raise ZeroProjection(f"edge ({src[h]}, {dst[h]}) is parallel to the normal at vertex {src[h]}")
    e2 = np.cross(normals, e1)
    x = np.einsum("ij,ij->i", proj, e1[src])
    y = np.einsum("ij,ij->i", proj, e2[src])
    return np.arctan2(y, x).reshape(F, 3)


def build_levi_civita_connection(mesh: SurfaceMesh) -> Connection:
    """Discrete Levi-Civita transport.

    Each vertex gets a tangent frame (area-weighted normal, first half-edge
    as reference direction).  Transport along ``i -> j`` rotates the edge
    direction seen at ``i`` onto the reversed edge direction seen at ``j``:
    ``r_ij = exp(i (theta_ji + pi - theta_ij))``.

    Raises
    ------
    ZeroNormal, ZeroProjection
    """
    theta = _frame_angles(mesh, vertex_normals(mesh))
    # angle of the half-edge along / against the stored edge direction
    fwd = np.empty(mesh.n_edges)
    bwd = np.empty(mesh.n_edges)
    pos = mesh.face_edge_sign > 0
    fwd[mesh.face_edges[pos]] = theta[pos]
    bwd[mesh.face_edges[~pos]] = theta[~pos]
    return Connection(mesh, np.exp(1j * (bwd + np.pi - fwd)))


@dataclass(frozen=True)
class Curvature:
    """Curvature angle per face.

    ``omega`` satisfies ``exp(i omega) = r_ki r_jk r_ij`` on every face.
    ``source`` records whether it came from the principal branch of the
    holonomy or was supplied externally.
    """

    omega: np.ndarray
    source: str = "holonomy"

    @classmethod
    def external(cls, connection: Connection, omega, tol: float = HOLONOMY_TOL) -> "Curvature":
        """Validate user-supplied angles against the holonomy (mod 2 pi)."""
        omega = np.array(omega, dtype=float)
        if omega.shape != (connection.mesh.n_faces,):
            raise ValidationError(f"need one curvature value per face ({connection.mesh.n_faces})")
        gap = np.abs(connection.holonomy() - np.exp(1j * omega))
        if np.any(gap > tol):
            f = int(np.argmax(gap))
            raise HolonomyMismatch(f"curvature on face {f} violates the holonomy constraint (gap {gap[f]:.2e})")
        omega.setflags(write=False)
        return cls(omega, "external")

    @property
    def total(self) -> float:
        return float(np.sum(self.omega))


def curvature_from_holonomy(mesh: SurfaceMesh, connection: Connection, *, margin: float = BRANCH_MARGIN) -> Curvature:
    """Principal argument of the face holonomy.

    Raises :class:`BranchBoundary` when a face is within ``margin`` of
    ``+-pi``, which means the triangulation is too coarse for the bundle.
    """
    om = np.angle(connection.holonomy())
    bad = np.nonzero(np.abs(om) > np.pi - margin)[0]
    if len(bad):
        raise BranchBoundary(f"face {bad[0]} has holonomy angle {om[bad[0]]:.9f} at the branch cut")
    om.setflags(write=False)
    return Curvature(om, "holonomy")


def degree_residual(curvature: Curvature) -> tuple[int, float]:
    """Nearest integer to the total curvature over 2 pi and the deviation from it."""
    x = curvature.total / (2 * np.pi)
    d = int(np.rint(x))
    return d, abs(x - d)


def degree(mesh: SurfaceMesh, curvature: Curvature, tol: float = INTEGER_TOL) -> int:
    """Degree of the bundle, ``sum(omega) / 2 pi``.

    Raises :class:`NotInteger` if the sum is more than ``tol`` away from an
    integer.
    """
    if len(curvature.omega) != mesh.n_faces:
        raise ValidationError("curvature does not match mesh")
    d, res = degree_residual(curvature)
    if res > tol:
        raise NotInteger(f"total curvature / 2 pi is {curvature.total / (2 * np.pi):.9f}, not an integer")
    return d


def transport(connection: Connection, path, value: complex) -> complex:
    """Parallel transport of ``value`` along a list of directed edges."""
    z = complex(value)
    prev = None
    for step in path:
        i, j = int(step[0]), int(step[1])
        if prev is not None and i != prev:
            raise DisconnectedPath(f"edge ({i}, {j}) does not start where the previous edge ended ({prev})")
        try:
            z = connection.value(i, j) * z
        except KeyError:
            raise DisconnectedPath(f"({i}, {j}) is not an edge of the mesh") from None
        prev = j
    return z
