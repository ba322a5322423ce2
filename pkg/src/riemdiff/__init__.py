"""riemdiff: decentralized diffusion adaptation on Riemannian manifolds.

A simulator for networks of agents that cooperatively minimize a sum of
smooth (possibly geodesically non-convex) costs over a manifold by
alternating local Riemannian stochastic gradient steps with tangent-
space averaging of neighbors, plus the geometry, network, metric, and
experiment machinery needed to study the algorithm empirically. Ships a
robust subspace estimation (robust PCA) application on the Grassmann
manifold.
"""

from riemdiff.manifolds import (
    CurvatureProfile,
    Euclidean,
    Grassmann,
    Manifold,
    ManifoldPoint,
    TangentVector,
    check_gradient,
    epsilon_constant,
    zeta_constants,
)

__version__ = "0.1.0"

__all__ = [
    "Manifold",
    "ManifoldPoint",
    "TangentVector",
    "Euclidean",
    "Grassmann",
    "CurvatureProfile",
    "zeta_constants",
    "epsilon_constant",
    "check_gradient",
    "__version__",
]
