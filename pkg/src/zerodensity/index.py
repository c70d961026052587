"""Rotation form, per-face index and zero density of explicit sections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import Connection, Curvature
from .errors import AntipodalEdge, NotInteger, ShapeMismatch, ZeroAtVertex

ZERO_TOL = 1e-12
ANTIPODAL_TOL = 1e-9
INTEGER_TOL = 1e-6


@dataclass(frozen=True)
class RotationForm:
    """Angle ``xi`` per stored edge direction; reversed edges carry ``-xi``."""

    xi: np.ndarray
    connection: Connection

    def directed(self, i: int, j: int) -> float:
        e, s = self.connection.mesh.find_edge(i, j)
        return float(s * self.xi[e])


@dataclass(frozen=True)
class IndexField:
    ind: np.ndarray
    density: np.ndarray

    @property
    def total(self) -> int:
        return int(self.ind.sum())


def _check_shape(phi, n):
    phi = np.asarray(phi, dtype=complex)
    if phi.shape[0] != n or phi.ndim not in (1, 2):
        raise ShapeMismatch(f"section has shape {phi.shape}, expected ({n},) or ({n}, N)")
    return phi


def _edge_angles(phi, connection):
    """Raw rotation angle of every stored edge (per column for 2-D input)."""
    e = connection.mesh.edges
    r = connection.r
    if phi.ndim == 2:
        r = r[:, None]
    a = phi[e[:, 1]] * np.conj(r * phi[e[:, 0]])
    return np.angle(a)


def _degenerate(phi, xi):
    """Boolean masks of vanishing vertices and antipodal edges."""
    mag = np.abs(phi)
    zero = mag < ZERO_TOL * mag.max(axis=0)
    anti = np.abs(xi) > np.pi - ANTIPODAL_TOL
    return zero, anti


def rotation_form(phi, connection: Connection) -> RotationForm:
    """``xi_ij = arg(phi_j / (r_ij phi_i))`` on every edge.

    Raises
    ------
    ZeroAtVertex
        ``|phi_i| < 1e-12 max |phi|``.
    AntipodalEdge
        ``|xi_ij| > pi - 1e-9``.
    """
    phi = _check_shape(phi, connection.mesh.n_vertices)
    if phi.ndim != 1:
        raise ShapeMismatch("rotation_form takes a single section")
    xi = _edge_angles(phi, connection)
    zero, anti = _degenerate(phi, xi)
    if zero.any():
        raise ZeroAtVertex(int(np.argmax(zero)))
    if anti.any():
        i, j = connection.mesh.edges[int(np.argmax(anti))]
        raise AntipodalEdge(i, j)
    xi.setflags(write=False)
    return RotationForm(xi, connection)


def _integrate(xi, connection, omega):
    """Pre-rounding index ``(d xi + Omega) / 2 pi`` per face (and column)."""
    m = connection.mesh
    sgn = m.face_edge_sign.astype(float)
    if xi.ndim == 2:
        dxi = np.einsum("fc,fcn->fn", sgn, xi[m.face_edges])
        return (dxi + omega[:, None]) / (2 * np.pi)
    return ((sgn * xi[m.face_edges]).sum(axis=1) + omega) / (2 * np.pi)


def face_indices(phi, connection: Connection, curvature: Curvature, *, tol: float = INTEGER_TOL) -> np.ndarray:
    """Integer index of every face for one section."""
    rf = rotation_form(phi, connection)
    x = _integrate(rf.xi, connection, np.asarray(curvature.omega))
    ind = np.rint(x)
    res = np.abs(x - ind)
    if np.any(res > tol):
        f = int(np.argmax(res))
        raise NotInteger(f"face {f}: index residue {res[f]:.2e}; curvature and connection disagree")
    return ind.astype(np.int64)


def face_index(phi, connection: Connection, curvature: Curvature, face: int) -> int:
    """Index ``(xi_ij + xi_jk + xi_ki + Omega) / 2 pi`` of a single face."""
    return int(face_indices(phi, connection, curvature)[face])


def total_index(phi, connection: Connection, curvature: Curvature) -> int:
    return int(face_indices(phi, connection, curvature).sum())


def index_density(phi, connection: Connection, curvature: Curvature) -> IndexField:
    """Per-face index and index per unit area."""
    ind = face_indices(phi, connection, curvature)
    return IndexField(ind, ind / connection.mesh.geometry.face_area)


def batch_face_indices(phi, connection: Connection, omega, *, tol: float = INTEGER_TOL):
    """Face indices for many sections at once, without raising on degeneracy.

    Parameters
    ----------
    phi : ndarray, shape (n, N)
    omega : ndarray, shape (F,)

    Returns
    -------
    ind : ndarray of int64, shape (F, N)
    residue : ndarray, shape (N,)
        Largest pre-rounding deviation from an integer per section.
    degenerate : ndarray of bool, shape (N,)
        Sections that vanish at a vertex or have an antipodal edge.
    """
    phi = _check_shape(phi, connection.mesh.n_vertices)
    if phi.ndim == 1:
        phi = phi[:, None]
    xi = _edge_angles(phi, connection)
    zero, anti = _degenerate(phi, xi)
    x = _integrate(xi, connection, np.asarray(omega, dtype=float))
    ind = np.rint(x)
    residue = np.abs(x - ind).max(axis=0)
    degenerate = zero.any(axis=0) | anti.any(axis=0)
    bad = (residue > tol) & ~degenerate
    if np.any(bad):
        s = int(np.argmax(bad))
        raise NotInteger(f"sample {s}: index residue {residue[s]:.2e}")
    return ind.astype(np.int64), residue, degenerate
