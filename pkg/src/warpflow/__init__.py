"""Curvature of warped products and Ricci / hyperbolic flows on them."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    InsufficientSnapshots,
    InvalidCoefficients,
    InvalidSpec,
    MissingVelocities,
    NotEinsteinFiber,
    OutOfDomain,
    SingularityReached,
    SingularMetric,
    UnstableStep,
    WarpflowError,
)
from .manifold import (  # noqa: E402
    CurvatureBundle,
    Domain,
    MetricField,
    ScalarField,
    christoffel,
    curvature_direct,
    grad_norm_sq,
    hessian,
    laplacian,
)
from .report import ResidualReport  # noqa: E402
from .warped import (  # noqa: E402
    LiftVector,
    WarpedProductSpec,
    oracle_compare,
    product_metric,
    ricci_unified,
    riemann_unified,
    scalar_unified,
    warped_connection,
)
