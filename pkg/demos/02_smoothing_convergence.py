"""Heat smoothing drives any section towards the ground state of the connection Laplacian."""

import numpy as np

from zerodensity import BundleSetup, dirichlet_energy, face_indices, projective_distance, smooth_section
from zerodensity.shapes import ellipsoid

setup = BundleSetup.from_mesh(ellipsoid(level=2))
basis = setup.eigenbasis()
lam = basis.eigenvalues
print(f"lambda_1 = {lam[0]:.6f}, lambda_2 = {lam[1]:.6f}, gap = {basis.spectral_gap:.6f}")

rng = np.random.default_rng(1)
phi = rng.standard_normal(basis.n) + 1j * rng.standard_normal(basis.n)
v1 = basis.vectors[:, 0]
print(f"{'t * gap':>8} {'energy / |phi|^2':>18} {'distance to v1':>15} {'zeros':>6}")
for x in (0, 0.1, 0.5, 1, 2, 5, 10, 20, 25):
    t = x / basis.spectral_gap
    s = smooth_section(basis, phi, t)
    e = dirichlet_energy(setup.laplacian, s) / setup.mass.norm(s) ** 2
    d = projective_distance(s, v1, setup.mass)
    nz = np.abs(face_indices(s, setup.connection, setup.curvature)).sum()
    print(f"{x:8.1f} {e:18.6f} {d:15.3e} {nz:6d}")
