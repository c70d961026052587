"""Mass matrix, connection Laplacian and Dirichlet energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bundle import Connection
from .errors import NonRealEnergy, ShapeMismatch
from .mesh import GeometryTables, SurfaceMesh


@dataclass(frozen=True)
class MassMatrix:
    """Diagonal mass matrix of barycentric dual areas."""

    diag: np.ndarray

    def __post_init__(self):
        if np.any(self.diag <= 0):
            raise ValueError("dual areas must be positive")

    @property
    def matrix(self) -> sp.csr_matrix:
        return sp.diags(self.diag).tocsr()

    @property
    def trace(self) -> float:
        return float(self.diag.sum())

    def inner(self, x, y) -> complex:
        """Weighted product ``sum_i A_i conj(x_i) y_i``, conjugate-linear in ``x``."""
        return complex(np.vdot(x, self.diag * np.asarray(y)))

    def norm(self, x) -> float:
        return float(np.sqrt(np.real(self.inner(x, x))))


@dataclass(frozen=True)
class ConnectionLaplacian:
    """Hermitian positive semi-definite connection Laplacian.

    ``L[i, j] = -w_ij * conj(r_ij)`` off the diagonal and
    ``L[i, i] = sum_j w_ij``.  Together with the mass matrix it defines the
    generalized eigenproblem ``L v = lambda M v``.
    """

    L: sp.csr_matrix
    mass: MassMatrix

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def dense(self) -> np.ndarray:
        return self.L.toarray()


def assemble(mesh: SurfaceMesh, geometry: GeometryTables | None, connection: Connection) -> ConnectionLaplacian:
    """Assemble the connection Laplacian and mass matrix.

    Negative cotan weights are kept as they are.
    """
    g = geometry if geometry is not None else mesh.geometry
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    w = g.cotan_weight
    r = connection.r
    n = mesh.n_vertices
    diag = np.bincount(i, weights=w, minlength=n) + np.bincount(j, weights=w, minlength=n)
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    vals = np.concatenate([-w * np.conj(r), -w * r, diag.astype(complex)])
    L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    L.sort_indices()
    return ConnectionLaplacian(L, MassMatrix(np.array(g.dual_area)))


def dirichlet_energy(lap: ConnectionLaplacian, phi, rtol: float = 1e-10) -> float:
    """Hermitian quadratic form ``phi^* L phi``.

    Raises :class:`NonRealEnergy` if the imaginary part exceeds ``rtol``
    relative to ``|phi|^T |L| |phi|``.
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (lap.n,):
        raise ShapeMismatch(f"section has shape {phi.shape}, expected ({lap.n},)")
    e = np.vdot(phi, lap.L @ phi)
    a = np.abs(phi)
    scale = float(a @ (abs(lap.L) @ a))
    if abs(e.imag) > rtol * max(scale, np.finfo(float).tiny):
        raise NonRealEnergy(f"imaginary energy residue {e.imag:.3e} (scale {scale:.3e})")
    return float(e.real)
