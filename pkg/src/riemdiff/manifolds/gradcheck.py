"""Finite-difference certificate for Riemannian gradients.

Checks the defining identity of the Riemannian gradient,
d/dt f(exp_x(t v)) |_{t=0} = <grad f(x), v>, by central differences
along geodesics (not chart coordinates) in random unit tangent
directions.
"""

from __future__ import annotations

import numpy as np

from riemdiff.manifolds.base import ManifoldPoint

__all__ = ["check_gradient"]


def check_gradient(
    oracle,
    x: ManifoldPoint,
    num_directions: int = 20,
    h: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max relative mismatch between geodesic finite differences and the gradient.

    ``oracle`` must provide ``batch_cost(point)`` and ``batch_rgrad(point)``.
    Returns max over random unit tangent directions v of

        |(f(exp_x(h v)) - f(exp_x(-h v))) / (2 h) - <grad, v>|
        -----------------------------------------------------
                       |<grad, v>| + 1e-12
    """
    manifold = x.manifold
    rng = np.random.default_rng(seed)
    grad = oracle.batch_rgrad(x)
    worst = 0.0
    for _ in range(num_directions):
        v = manifold.random_tangent(rng, x.coordinates)
        fwd = oracle.batch_cost(ManifoldPoint(manifold, manifold.exp(x.coordinates, h * v)))
        bwd = oracle.batch_cost(ManifoldPoint(manifold, manifold.exp(x.coordinates, -h * v)))
        slope = (fwd - bwd) / (2.0 * h)
        ip = float(manifold.inner(x.coordinates, grad.components, v))
        worst = max(worst, abs(slope - ip) / (abs(ip) + 1e-12))
    return worst
