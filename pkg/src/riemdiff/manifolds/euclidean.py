"""Flat Euclidean reference manifold.

Geometry degenerates to vector arithmetic: exp is addition, log is the
difference vector, transport is the identity. Used as the oracle space
for validating the distributed algorithms against independent
flat-space implementations.
"""

from __future__ import annotations

import numpy as np

from riemdiff.errors import ContractViolation
from riemdiff.manifolds.base import Manifold


class Euclidean(Manifold):
    """R^n with the standard inner product; points are shape-(n,) vectors."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ContractViolation(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.point_shape = (dim,)
        self.injectivity_bound = np.inf

    def exp(self, x, v):
        self._check_pair(x, v)
        return x + v

    def log(self, x, y):
        self._check_pair(x, y)
        return y - x

    def dist(self, x, y):
        self._check_pair(x, y)
        return np.linalg.norm(y - x, axis=-1)

    def transport(self, x, y, v):
        self._check_pair(x, y)
        return np.broadcast_to(v, np.broadcast_shapes(x.shape, v.shape)).copy()

    def egrad_to_rgrad(self, x, g):
        self._check_pair(x, g)
        return np.asarray(g, dtype=float)

    def canonicalize(self, m):
        m = np.asarray(m, dtype=float)
        if m.shape[-1] != self.dim:
            raise ContractViolation(
                f"expected vectors of dimension {self.dim}, got shape {m.shape}"
            )
        return m

    def random_point(self, rng):
        return rng.standard_normal(self.dim)

    def random_tangent(self, rng, x):
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def _check_pair(self, x, other):
        if x.shape[-1] != self.dim or other.shape[-1] != self.dim:
            raise ContractViolation(
                f"shape mismatch on {self}: {x.shape} vs {other.shape}"
            )

    def __repr__(self):
        return f"Euclidean({self.dim})"
