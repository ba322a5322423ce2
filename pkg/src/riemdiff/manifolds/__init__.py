from riemdiff.manifolds.base import (
    Manifold,
    ManifoldPoint,
    TangentVector,
    dist,
    exp,
    inner,
    log,
    norm,
    transport,
)
from riemdiff.manifolds.curvature import (
    CurvatureProfile,
    epsilon_constant,
    zeta_constants,
)
from riemdiff.manifolds.euclidean import Euclidean
from riemdiff.manifolds.gradcheck import check_gradient
from riemdiff.manifolds.grassmann import Grassmann

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
    "exp",
    "log",
    "dist",
    "transport",
    "inner",
    "norm",
]
