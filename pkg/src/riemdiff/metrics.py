"""Intrinsic network statistics and per-iteration trace records.

The Frechet mean generalizes the arithmetic mean to manifolds: it
minimizes the sum of squared geodesic distances to a point set, and is
computed here by the fixed-point (Karcher) iteration
``m <- exp_m(mean_k log_m(w_k))``. The Frechet variance is the attained
minimum. The consensus bias weighs squared pairwise distances by the
combination matrix, and the mean square deviation (MSD) averages
squared distances to a reference optimum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from riemdiff.errors import ContractViolation, ConvergenceError
from riemdiff.manifolds.base import Manifold, ManifoldPoint, TangentVector
from riemdiff.network import NetworkTopology

__all__ = [
    "TraceRow",
    "MetricTrace",
    "frechet_mean",
    "frechet_variance",
    "consensus_bias",
    "msd",
    "stacked_grad_norm_sq",
]

METRIC_NAMES = ("msd", "frechet_variance", "consensus_bias", "cost", "grad_norm_sq")


@dataclass(frozen=True)
class TraceRow:
    """Metrics of one synchronous round; absent metrics stay None."""

    t: int
    msd: float | None = None
    frechet_variance: float | None = None
    consensus_bias: float | None = None
    cost: float | None = None
    grad_norm_sq: float | None = None

    def __post_init__(self):
        for name in ("msd", "frechet_variance", "consensus_bias"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ContractViolation(f"{name} must be nonnegative, got {value}")


@dataclass
class MetricTrace:
    """Per-iteration records of one run, in strictly increasing round order."""

    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ContractViolation(
                f"round index {row.t} does not increase past {self.rows[-1].t}"
            )
        self.rows.append(row)

    def column(self, name: str) -> list[float | None]:
        return [getattr(row, name) for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


# -- stacked-array internals ---------------------------------------------------


def stack_points(points: list[ManifoldPoint]) -> tuple[Manifold, np.ndarray]:
    if not points:
        raise ContractViolation("need at least one point")
    manifold = points[0].manifold
    for p in points[1:]:
        if p.manifold is not manifold:
            raise ContractViolation("points belong to different manifolds")
    return manifold, np.stack([p.coordinates for p in points])


def frechet_mean_array(
    manifold: Manifold,
    stack: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 200,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Karcher iteration on a (K, *point_shape) stack; returns the mean array."""
    m = stack[0] if init is None else init
    residual = np.inf
    for _ in range(max_iter):
        step = manifold.log(m, stack).mean(axis=0)
        residual = float(np.linalg.norm(step))
        if residual <= tol:
            return m
        m = manifold.exp(m, step)
    raise ConvergenceError(
        f"Frechet mean did not reach tol={tol} in {max_iter} iterations",
        last_iterate=m,
        residual=residual,
    )


# -- public operations ---------------------------------------------------------


def frechet_mean(
    points: list[ManifoldPoint],
    tol: float = 1e-10,
    max_iter: int = 200,
    init: ManifoldPoint | None = None,
) -> ManifoldPoint:
    """Point minimizing the sum of squared geodesic distances to ``points``.

    On the flat manifold this equals the arithmetic mean. ``init`` warm
    starts the iteration (useful when tracking a slowly moving mean).
    """
    manifold, stack = stack_points(points)
    init_array = None if init is None else init.coordinates
    return ManifoldPoint(
        manifold, frechet_mean_array(manifold, stack, tol, max_iter, init_array)
    )


def frechet_variance(
    points: list[ManifoldPoint],
    tol: float = 1e-10,
    max_iter: int = 200,
    init: ManifoldPoint | None = None,
    diameter_bound: float | None = None,
) -> float:
    """Sum of squared geodesic distances from ``points`` to their Frechet mean.

    When ``diameter_bound`` is given, warns (without aborting) if a
    triangle-inequality bound on the pairwise spread exceeds it.
    """
    manifold, stack = stack_points(points)
    init_array = None if init is None else init.coordinates
    mean = frechet_mean_array(manifold, stack, tol, max_iter, init_array)
    d = np.atleast_1d(manifold.dist(mean, stack))
    if diameter_bound is not None and len(d) > 1:
        two_largest = np.sort(d)[-2:].sum()
        if two_largest > diameter_bound:
            warnings.warn(
                f"iterate spread may exceed the configured diameter "
                f"{diameter_bound:.3g} (bound {two_largest:.3g})",
                RuntimeWarning,
                stacklevel=2,
            )
    return float(np.sum(d**2))


def consensus_bias(points: list[ManifoldPoint], topology: NetworkTopology) -> float:
    """Combination-weighted sum of squared pairwise geodesic distances."""
    manifold, stack = stack_points(points)
    if len(points) != topology.num_agents:
        raise ContractViolation(
            f"{len(points)} points for a {topology.num_agents}-agent topology"
        )
    dst, src, wts = topology.neighbor_index
    if len(dst) == 0:
        return 0.0
    d = manifold.dist(stack[dst], stack[src])
    return float(np.sum(wts * d**2))


def msd(points: list[ManifoldPoint], reference: ManifoldPoint) -> float:
    """Mean squared geodesic distance from the points to a reference."""
    manifold, stack = stack_points(points)
    if reference.manifold is not manifold:
        raise ContractViolation("reference lives on a different manifold")
    d = np.atleast_1d(manifold.dist(reference.coordinates, stack))
    return float(np.mean(d**2))


def stacked_grad_norm_sq(gradients: list[TangentVector]) -> float:
    """Squared norm of the stacked network gradient, (1/K^2) sum_k ||g_k||^2."""
    if not gradients:
        raise ContractViolation("need at least one gradient")
    k = len(gradients)
    return float(sum(g.norm() ** 2 for g in gradients)) / (k * k)
