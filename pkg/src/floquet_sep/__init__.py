"""Numerical laboratory for the principal Floquet bundle and exponential
separation of linear nonautonomous reaction-diffusion flows.

The package discretizes a divergence-form diffusion operator with Robin
boundary data, evolves states with a positivity-preserving splitting
scheme whose time-one maps form a cocycle over an explicit torus hull of
the time-dependent coefficient, constructs the attracting positive ray
and its uniformly positive dual section by pullback iteration, and
verifies at desk scale that globally positive trajectories are unique up
to a positive scalar.
"""

__version__ = "0.1.0"

from .bundle import (
    PrincipalFiber,
    SeparationEstimate,
    continuous_separation,
    dual_vector,
    estimate_separation,
    hilbert_metric,
    measure_contraction,
    orbit_fibers,
    principal_fiber,
    principal_vector,
    project,
    time_one_gap,
    verify_invariance,
)
from .coefficients import CoefficientField, HullPoint, Profile, field_from_profiles
from .config import EXPERIMENTS, ScenarioConfig, parse_config
from .errors import ConfigError, NumericalError
from .experiments import (
    GlobalSolutionApprox,
    UniquenessReport,
    approximate_global_positive,
    bundle_membership_test,
    uniqueness_test,
)
from .mesh import SpatialMesh, build_mesh
from .operators import EllipticOperator, SpectrumResult, build_operator, spectrum
from .propagation import Propagator, PropagatorConfig, Trajectory
from .runner import RunManifest, build_objects, dependency_closure, run_scenario

__all__ = [
    "__version__",
    "CoefficientField",
    "ConfigError",
    "EllipticOperator",
    "EXPERIMENTS",
    "GlobalSolutionApprox",
    "HullPoint",
    "NumericalError",
    "PrincipalFiber",
    "Profile",
    "Propagator",
    "PropagatorConfig",
    "RunManifest",
    "ScenarioConfig",
    "SeparationEstimate",
    "SpatialMesh",
    "SpectrumResult",
    "Trajectory",
    "UniquenessReport",
    "approximate_global_positive",
    "build_mesh",
    "build_objects",
    "build_operator",
    "bundle_membership_test",
    "continuous_separation",
    "dependency_closure",
    "dual_vector",
    "estimate_separation",
    "field_from_profiles",
    "hilbert_metric",
    "measure_contraction",
    "orbit_fibers",
    "parse_config",
    "principal_fiber",
    "principal_vector",
    "project",
    "run_scenario",
    "spectrum",
    "time_one_gap",
    "uniqueness_test",
    "verify_invariance",
]
