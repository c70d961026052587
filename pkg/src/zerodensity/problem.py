"""Bundle of everything derived from a mesh: connection, curvature, Laplacian."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .bundle import Connection, Curvature, build_levi_civita_connection, curvature_from_holonomy, degree
from .laplace import ConnectionLaplacian, assemble
from .mesh import SurfaceMesh
from .spectral import EigenBasis, dense_eigenbasis, smallest_eigenpairs


@dataclass(frozen=True)
class BundleSetup:
    """A mesh with a line bundle and its Laplacian.

    Build with :meth:`from_mesh`; the Levi-Civita connection and principal
    curvature are used unless given.
    """

    mesh: SurfaceMesh
    connection: Connection
    curvature: Curvature
    laplacian: ConnectionLaplacian

    @classmethod
    def from_mesh(cls, mesh: SurfaceMesh, connection: Connection | None = None,
                  curvature: Curvature | None = None) -> "BundleSetup":
        conn = connection if connection is not None else build_levi_civita_connection(mesh)
        curv = curvature if curvature is not None else curvature_from_holonomy(mesh, conn)
        return cls(mesh, conn, curv, assemble(mesh, mesh.geometry, conn))

    @cached_property
    def degree(self) -> int:
        return degree(self.mesh, self.curvature)

    @property
    def mass(self):
        return self.laplacian.mass

    def eigenbasis(self, k: int | None = None, tol: float = 1e-9) -> EigenBasis:
        """Full dense basis when ``k`` is None, else the ``k`` smallest pairs."""
        if k is None or k >= self.mesh.n_vertices:
            return dense_eigenbasis(self.laplacian)
        return smallest_eigenpairs(self.laplacian, k=k, tol=tol)
