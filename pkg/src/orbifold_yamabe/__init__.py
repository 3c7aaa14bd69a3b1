"""Numerical laboratory for prescribed scalar curvature on radial 4-orbifolds.

Modules: :mod:`geometry` (LeBrun and football backgrounds), :mod:`asymptotics`
(ADM mass, Green's function, conformal blow-up), :mod:`bubble_energy`
(bubbles, sphere constants, the energy functional), :mod:`solver` (shooting,
continuation, wall classification), :mod:`pohozaev` (radial Pohozaev
identity) and :mod:`cli`.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    Coordinate,
    DomainError,
    Kind,
    MetricSample,
    RadialGeometry,
    coord_transform,
    metric_coeffs,
    numeric_scalar_curvature,
    radial_laplacian,
    scalar_curvature,
    volume_density,
)
from .kfamily import KFamily, KFamilyError, KKind, make_K_minus  # noqa: E402
from .solver import (  # noqa: E402
    ContinuationResult,
    NotFound,
    RadialSolution,
    WallClass,
    WallLabel,
    classify_wall,
    continuation_in_p,
    multi_start_count,
    ode_rhs,
    shoot,
    solve_bvp,
    transform_n_to_2,
)
from .asymptotics import (  # noqa: E402
    GreensFunctionSolution,
    MassEstimate,
    adm_mass,
    cartesian_metric_components,
    conformal_blowup,
    green_function_radial,
    mass_regular_term_check,
)
from .bubble_energy import (  # noqa: E402
    EnergyReport,
    bubble_eval,
    bubble_residual,
    energy_expansion_check,
    energy_J,
    hat_constants,
    modified_max_BK,
    sobolev_quotient,
    test_function,
)
from .pohozaev import PohozaevReport, pohozaev_boundary, pohozaev_report, pohozaev_volume_terms  # noqa: E402
