"""Discrete varifolds in R^S with weak curvature.

A discrete m-varifold is a finite weighted atom set on the Grassmann
bundle: atoms (x, P, w) with x a point, P the orthogonal projector onto
an m-plane, and w > 0 a weight.  Everything downstream (first variation,
mean curvature estimators, curvature tensor recovery, density ratios,
mass/diameter bounds, curvature-energy descent) operates on that
representation.
"""

from .varifold import (
    DiscreteVarifold,
    SimplicialMesh,
    ball_mass,
    connected_components,
    hausdorff_distance,
    projector_defects,
    projector_from_basis,
    support_diameter,
    validate_projectors,
    varifold_from_mesh,
)
from .ambient import (
    BallSubset,
    Euclidean,
    ManifoldSubset,
    Product,
    ShellSubset,
    Sphere,
    TubeSubset,
    ambient_from_config,
    curvature_correction,
    projector_derivative_fd_error,
    subset_from_config,
)
from .firstvar import (
    AffineField,
    CurvatureField,
    PolynomialField,
    RadialBumpField,
    energy_integral,
    first_variation,
    lp_norm,
    mean_curvature_kernel,
    mean_curvature_mesh,
    relative_mean_curvature,
)
from .recovery import (
    BumpDictionary,
    CurvatureTensorField,
    admissible_random_second_fundamental,
    full_from_second_fundamental,
    recover_curvature_tensor,
    second_fundamental_from_full,
    trace_mean_curvature,
    weak_identity_residual,
)
from .bounds import (
    LOCAL_MONOTONICITY_SWEEP,
    BoundReport,
    BoundRow,
    c_diameter_lower,
    c_diameter_upper,
    c_fundamental,
    c_mass_lower,
    check_bounds,
    check_local_monotonicity,
    check_lower_density,
    cubic_cutoff,
    density_estimate,
    isoperimetric_ratio,
    omega_ball,
    quartic_cutoff,
    radial_profile,
    radial_profile_defect,
)
from .energy import (
    DescentTrace,
    EnergySpec,
    MinimizeOptions,
    MinimizeResult,
    convergence_monitor,
    gradient_fd_check,
    mesh_energy,
    minimize_energy,
    nondegeneracy_monitor,
    shape_gradient,
    sphericity,
    varifold_energy,
)
from . import shapes, io

__version__ = "0.1.0"
