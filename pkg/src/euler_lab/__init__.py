"""Verification laboratory for compactly supported steady planar Euler flows."""

from .grid import (
    Grid2,
    ScalarField,
    VectorField2,
    make_grid,
    laplacian,
    gradient,
    perp_gradient,
    divergence,
    curl,
)
from .domain import DomainMask, support_mask, distance_field, disk_mask, annulus_mask, box_mask
from .flows import (
    RadialProfile,
    ClosedFormPair,
    circular_flow,
    example_flow,
    example_profile,
    pressure_radial,
    superpose_disjoint,
)
from .euler import SteadyReport, vorticity, steady_residual, transport_residual, stream_function
from .nonlinearity import (
    LevelSet,
    SampledNonlinearity,
    level_set,
    connectedness_scan,
    extract_f,
    endpoint_regularity,
    mean_zero_check,
)
from .topology import (
    winding_number,
    tangential_nonvanishing,
    curvature_winding,
    annularity_verdict,
)
from .singular import (
    SingularPotential,
    DiscreteOperator,
    assemble,
    principal_eigenpair,
    hardy_ratio,
    positivity_radius,
    weak_max_principle_check,
    comparison_profile,
    psi_fields,
    hopf_check,
    corner_check,
    resolved_interior,
)
from .moving_plane import (
    PlaneSweepState,
    SymmetryReport,
    reflect_compare,
    critical_plane,
    symmetry_verdict,
    singular_quotient_bound,
    gradient_lower_bound,
    fprime_bound,
)

__version__ = "0.1.0"
