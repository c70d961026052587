"""Levi-Civita bundle on an ellipsoid: degree, curvature and the index of random sections."""

import numpy as np

from zerodensity import BundleSetup, face_indices
from zerodensity.shapes import ellipsoid

setup = BundleSetup.from_mesh(ellipsoid(level=2))
mesh, cur = setup.mesh, setup.curvature
print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_faces} faces, euler characteristic {mesh.euler_characteristic}")
print(f"total curvature / 2pi = {cur.total / (2 * np.pi):.12f}  ->  degree {setup.degree}")
print(f"curvature per face ranges over [{cur.omega.min():.4f}, {cur.omega.max():.4f}]")

# Every admissible section has total index equal to the degree, however its zeros are spread.
rng = np.random.default_rng(0)
for trial in range(5):
    phi = rng.standard_normal(mesh.n_vertices) + 1j * rng.standard_normal(mesh.n_vertices)
    ind = face_indices(phi, setup.connection, cur)
    print(f"section {trial}: +1 on {np.sum(ind == 1):3d} faces, -1 on {np.sum(ind == -1):3d}, total {ind.sum()}")
