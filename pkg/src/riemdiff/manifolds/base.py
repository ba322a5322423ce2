"""Manifold interface and typed point/tangent wrappers.

A :class:`Manifold` implements the geometric kernels (exp, log, dist,
parallel transport, gradient projection) directly on ``numpy`` arrays.
Every kernel is batched: inputs may carry leading batch axes in front of
the manifold's ``point_shape``, which is what keeps multi-agent loops
fast. :class:`ManifoldPoint` and :class:`TangentVector` are thin typed
wrappers used at API boundaries; binary operations on them assert that
both operands live at the same base point, which catches the classic
cross-tangent-space bug early.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from riemdiff.errors import ContractViolation

__all__ = [
    "Manifold",
    "ManifoldPoint",
    "TangentVector",
    "exp",
    "log",
    "dist",
    "transport",
    "inner",
    "norm",
]


@dataclass(frozen=True)
class ManifoldPoint:
    """A point on a manifold, stored as a dense coordinate array."""

    manifold: "Manifold"
    coordinates: np.ndarray

    def __post_init__(self):
        if self.coordinates.shape != self.manifold.point_shape:
            raise ContractViolation(
                f"point shape {self.coordinates.shape} does not match "
                f"{self.manifold} point shape {self.manifold.point_shape}"
            )

    def same_base(self, other: "ManifoldPoint") -> bool:
        return self.manifold is other.manifold and np.array_equal(
            self.coordinates, other.coordinates
        )


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector attached to its base point."""

    base: ManifoldPoint
    components: np.ndarray

    def __post_init__(self):
        if self.components.shape != self.base.coordinates.shape:
            raise ContractViolation(
                f"tangent shape {self.components.shape} does not match "
                f"point shape {self.base.coordinates.shape}"
            )

    @property
    def manifold(self) -> "Manifold":
        return self.base.manifold

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _require_same_base(self, other)
        return TangentVector(self.base, self.components + other.components)

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        _require_same_base(self, other)
        return TangentVector(self.base, self.components - other.components)

    def __mul__(self, scalar: float) -> "TangentVector":
        return TangentVector(self.base, self.components * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, -self.components)


def _require_same_base(u: TangentVector, v: TangentVector) -> None:
    if not u.base.same_base(v.base):
        raise ContractViolation("tangent vectors live at different base points")


class Manifold(ABC):
    """Behavioral contract shared by all manifolds.

    Subclasses implement the array-level kernels; all kernels accept
    leading batch axes. Points produced by kernels are canonical
    representatives (for quotient manifolds this means orthonormal).
    """

    point_shape: tuple[int, ...]
    injectivity_bound: float

    # -- array-level kernels -------------------------------------------------

    @abstractmethod
    def exp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Geodesic endpoint reached from ``x`` with initial velocity ``v``."""

    @abstractmethod
    def log(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Initial velocity of the geodesic from ``x`` to ``y`` (inverse exp)."""

    @abstractmethod
    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Geodesic distance; returns a scalar or a batch of scalars."""

    @abstractmethod
    def transport(self, x: np.ndarray, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Parallel transport of ``v`` from ``x`` to ``y`` along the geodesic."""

    @abstractmethod
    def egrad_to_rgrad(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Project a Euclidean gradient onto the tangent space at ``x``."""

    @abstractmethod
    def canonicalize(self, m: np.ndarray) -> np.ndarray:
        """Canonical representative of the point described by ``m``."""

    @abstractmethod
    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        """Draw a random point (canonical representative)."""

    @abstractmethod
    def random_tangent(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
        """Draw a random unit-Frobenius-norm tangent vector at ``x``."""

    def inner(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Riemannian inner product at ``x`` (canonical metric: Frobenius)."""
        axes = tuple(range(-len(self.point_shape), 0))
        return np.sum(u * v, axis=axes)

    # -- typed wrappers ------------------------------------------------------

    def point(self, coordinates: np.ndarray) -> ManifoldPoint:
        """Wrap an array as a point, canonicalizing it first."""
        return ManifoldPoint(self, self.canonicalize(np.asarray(coordinates, dtype=float)))

    def tangent(self, base: ManifoldPoint, components: np.ndarray) -> TangentVector:
        """Wrap an array as a tangent vector at ``base``, validating tangency."""
        components = np.asarray(components, dtype=float)
        self._check_tangent(base.coordinates, components)
        return TangentVector(base, components)

    def zero_tangent(self, base: ManifoldPoint) -> TangentVector:
        return TangentVector(base, np.zeros(self.point_shape))

    def _check_tangent(self, x: np.ndarray, v: np.ndarray) -> None:
        if v.shape != x.shape:
            raise ContractViolation(
                f"tangent shape {v.shape} does not match point shape {x.shape}"
            )

    def __repr__(self) -> str:
        return type(self).__name__


# -- typed operations ---------------------------------------------------------
#
# These are the public, contract-checked entry points. They delegate to the
# batched array kernels on the owning manifold.


def exp(x: ManifoldPoint, v: TangentVector) -> ManifoldPoint:
    """Exponential map; requires ``v`` to be based at ``x``."""
    if not v.base.same_base(x):
        raise ContractViolation("tangent vector is not based at the given point")
    return ManifoldPoint(x.manifold, x.manifold.exp(x.coordinates, v.components))


def log(x: ManifoldPoint, y: ManifoldPoint) -> TangentVector:
    """Inverse exponential map: the velocity pointing from ``x`` to ``y``."""
    _require_same_manifold(x, y)
    return TangentVector(x, x.manifold.log(x.coordinates, y.coordinates))


def dist(x: ManifoldPoint, y: ManifoldPoint) -> float:
    """Geodesic distance between two points."""
    _require_same_manifold(x, y)
    return float(x.manifold.dist(x.coordinates, y.coordinates))


def transport(x: ManifoldPoint, y: ManifoldPoint, v: TangentVector) -> TangentVector:
    """Parallel transport of ``v`` from ``x`` to ``y``."""
    _require_same_manifold(x, y)
    if not v.base.same_base(x):
        raise ContractViolation("tangent vector is not based at the source point")
    return TangentVector(y, x.manifold.transport(x.coordinates, y.coordinates, v.components))


def inner(u: TangentVector, v: TangentVector) -> float:
    """Riemannian inner product of two tangent vectors at the same base."""
    _require_same_base(u, v)
    return float(u.manifold.inner(u.base.coordinates, u.components, v.components))


def norm(v: TangentVector) -> float:
    return v.norm()


def _require_same_manifold(x: ManifoldPoint, y: ManifoldPoint) -> None:
    if x.manifold is not y.manifold:
        raise ContractViolation("points belong to different manifolds")
    if x.coordinates.shape != y.coordinates.shape:
        raise ContractViolation(
            f"point shapes differ: {x.coordinates.shape} vs {y.coordinates.shape}"
        )
