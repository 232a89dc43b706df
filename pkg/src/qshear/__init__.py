"""Shear-driven Q-tensor dynamics: vector fields, integration, and analysis."""

from .analysis import (
    ConservationReport,
    EquilibriumAtlas,
    EquilibriumReport,
    InvariantCheck,
    OmegaLimit,
    RegimeReport,
    conjugacy_check,
    conservation_reports,
    corotate,
    detect_period,
    eigenframe_transport_check,
    energy_monotonicity,
    find_equilibria,
    first_integral_H,
    first_integral_V,
    invariant_checks,
    invariant_surface_residual,
    long_regime_experiment,
    norm_ode_check,
    omega_limit_classify,
    rotation_frame,
    short_regime_experiment,
)
from .coords import ChartDomain, chart_domain, phys_to_xyz, xyz_to_phys
from .dynamics import (
    COROTATIONAL,
    EIGEN_PAIR,
    FULL,
    GRADIENT_FLOW,
    PHYS,
    REDUCED3D,
    RESCALED,
    SHORTTIME3D,
    SHORTTIME_MATRIX,
    SystemKind,
    jacobian,
    legacy,
    plane_h,
    rhs_corotational,
    rhs_eigen,
    rhs_full,
    rhs_gradient,
    rhs_legacy,
    rhs_phys,
    rhs_plane_h,
    rhs_reduced,
    rhs_rescaled,
    rhs_shorttime_coords,
    rhs_shorttime_matrix,
    stationary_residual,
)
from .integrator import (
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    integrate,
    integrate_until,
)
from .state import ChartSingularityError, EigenState, PhysState, ReducedState
from .tensor import (
    EigenFrame,
    MaterialParams,
    QTensor,
    bulk_energy,
    bulk_gradient,
    commutator,
    critical_s,
    eigen_decomposition,
    frobenius,
    inner,
    shear_matrices,
    uniaxial,
)

__version__ = "0.1.0"
