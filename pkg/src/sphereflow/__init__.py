"""Numerical laboratory for a locally constrained curvature flow on S^{n+1}.

Convex axisymmetric hypersurfaces evolve under the normal speed
c * phi'(rho) - u * sigma_{k+1}/sigma_k, which conserves one
quermassintegral and monotonically orders the rest.  The package bundles the
symmetric-function algebra, radial-graph geometry, quermassintegral audits,
the graph and support-function solvers, and a batch CLI.
"""

from .exceptions import ConeViolation, ConvexityLoss, MonotonicityError, StepRejected
from .symfunc import (
    ConeLabel,
    CurvatureVector,
    QuotientInfo,
    cone_label,
    identity_quotient,
    in_cone,
    in_cone_closure,
    newton_maclaurin_gap,
    pinch_deficit_parts,
    quotient,
    quotient_trace_gaps,
    sigma,
    sigma_excl,
)
from .hypersurface import (
    GeometryState,
    RadialProfile,
    SphereGrid2D,
    geometry,
    geometry_full_s2,
    hessian_contraction_residuals,
    integrate,
    load_checkpoint,
    minkowski_residual,
    save_checkpoint,
    volume,
)
from .quermass import (
    AuditReport,
    QuermassVector,
    audit_inequalities,
    quermass_vector,
    sphere_comparison,
    sphere_quermass,
)
from .flow import (
    DtPolicy,
    FlowConfig,
    FlowResult,
    FlowTrace,
    ShapeSpec,
    evolution_residual_f,
    evolution_residual_u,
    functional_derivative_residual,
    run,
    speed,
    step,
)
from .dualflow import (
    DualResult,
    DualState,
    DualTrace,
    decomposition_residual,
    dual_from_profile,
    dual_run,
    g_operator,
    gamma_transform,
    profile_from_dual,
    speed_transport_residual,
    support_closure,
)
from .identities import SuiteReport, run_identity_suite

__version__ = "1.0.0"

__all__ = [
    "ConeViolation", "ConvexityLoss", "MonotonicityError", "StepRejected",
    "ConeLabel", "CurvatureVector", "QuotientInfo", "cone_label",
    "identity_quotient", "in_cone", "in_cone_closure", "newton_maclaurin_gap",
    "pinch_deficit_parts", "quotient", "quotient_trace_gaps", "sigma",
    "sigma_excl",
    "GeometryState", "RadialProfile", "SphereGrid2D", "geometry",
    "geometry_full_s2", "hessian_contraction_residuals", "integrate",
    "load_checkpoint", "minkowski_residual", "save_checkpoint", "volume",
    "AuditReport", "QuermassVector", "audit_inequalities", "quermass_vector",
    "sphere_comparison", "sphere_quermass",
    "DtPolicy", "FlowConfig", "FlowResult", "FlowTrace", "ShapeSpec",
    "evolution_residual_f", "evolution_residual_u",
    "functional_derivative_residual", "run", "speed", "step",
    "DualResult", "DualState", "DualTrace", "decomposition_residual",
    "dual_from_profile", "dual_run", "g_operator", "gamma_transform",
    "profile_from_dual", "speed_transport_residual", "support_closure",
    "SuiteReport", "run_identity_suite",
]
