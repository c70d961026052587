"""Expected zero densities of heat-smoothed random sections of discrete line bundles."""

__version__ = "0.1.0"

from .bundle import (
    Connection,
    Curvature,
    build_levi_civita_connection,
    curvature_from_holonomy,
    degree,
    transport,
)
from .closed_form import (
    DensityField,
    OmegaTrack,
    closed_form_density,
    default_schedule,
    delta_section,
    expected_density_field,
    expected_index,
    omega_track,
    smoothed_delta_products,
)
from .index import face_index, face_indices, index_density, rotation_form, total_index
from .laplace import ConnectionLaplacian, MassMatrix, assemble, dirichlet_energy
from .mesh import (
    GeometryTables,
    SurfaceMesh,
    corner_angle,
    cotan_weight,
    dual_area,
    face_area,
    load_mesh,
)
from .montecarlo import SampleStats, compare_report, empirical_index_stats, sample_random_section
from .problem import BundleSetup
from .spectral import (
    EigenBasis,
    dense_eigenbasis,
    expm_apply_oracle,
    projective_distance,
    smallest_eigenpairs,
    smooth_section,
)

