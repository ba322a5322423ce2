"""Grassmann manifold of p-dimensional subspaces of R^n.

A subspace is stored through an n x p representative with orthonormal
columns; representatives are equivalent under right multiplication by a
p x p orthogonal matrix, and every operation here is invariant to that
choice. Geometry runs through principal angles: the singular values of
``U1.T @ U2`` are the cosines of the angles between the subspaces, the
geodesic distance is the 2-norm of the angle vector, and exp/log/
transport use the closed-form SVD factorizations of the velocity.

All kernels accept leading batch axes, e.g. a (K, n, p) stack of agent
representatives.
"""

from __future__ import annotations

import numpy as np

from riemdiff.errors import ContractViolation, DomainError
from riemdiff.manifolds.base import Manifold
from riemdiff.manifolds.curvature import CurvatureProfile

_mT = np.swapaxes  # used as _mT(a, -1, -2)


def _transpose(a):
    return np.swapaxes(a, -1, -2)


class Grassmann(Manifold):
    """Gr(n, p) with the canonical (Frobenius) metric on horizontal vectors."""

    # representative invariant: ||U^T U - I|| below this
    ORTHONORMAL_TOL = 1e-10
    # exp re-orthonormalizes its output above this drift
    _REFRESH_TOL = 1e-12
    # tolerance for the horizontality contract U^T xi = 0 on kernel inputs
    HORIZONTAL_TOL = 1e-8
    # tan(theta) beyond this counts as the cut locus (theta ~ pi/2)
    _CUT_LOCUS_TAN = 1e8

    def __init__(self, n: int, p: int):
        if not 1 <= p <= n:
            raise ContractViolation(f"need 1 <= p <= n, got n={n}, p={p}")
        self.n = n
        self.p = p
        self.point_shape = (n, p)
        # enforced per principal angle (singular value of the velocity)
        self.injectivity_bound = np.pi / 2

    # -- geometry -------------------------------------------------------------

    def dist(self, x, y):
        """Euclidean norm of the principal-angle vector between span(x), span(y).

        Angles are the arccosines of the singular values of ``x.T y``,
        clamped into [0, 1] so rounding can never produce NaN. Angles
        below pi/4 are recovered from their sines (singular values of
        the residual ``y - x x^T y``) instead, which stays accurate
        where arccos loses half the working precision.
        """
        self._check_point_shape(x)
        self._check_point_shape(y)
        m = _transpose(x) @ y
        cos_v = np.clip(np.linalg.svd(m, compute_uv=False), 0.0, 1.0)
        sin_v = np.clip(np.linalg.svd(y - x @ m, compute_uv=False), 0.0, 1.0)
        # cos values sort angles ascending, sin values descending: flip one
        sin_v = sin_v[..., ::-1]
        theta = np.where(cos_v**2 > 0.5, np.arcsin(sin_v), np.arccos(cos_v))
        return np.linalg.norm(theta, axis=-1)

    def exp(self, x, v):
        """Geodesic endpoint ``(x Y cos(S) + X sin(S)) Y^T`` for ``v = X S Y^T``.

        Requires ``v`` horizontal at ``x`` and every singular value of
        ``v`` below pi/2 (the per-angle injectivity bound).
        """
        self._check_point_shape(x)
        self._check_horizontal(x, v)
        X, s, Yh = np.linalg.svd(v, full_matrices=False)
        if np.any(s >= np.pi / 2):
            raise DomainError(
                f"velocity has principal angle {np.max(s):.6f} >= pi/2; "
                "beyond the injectivity bound of the exponential map"
            )
        cos_s = np.cos(s)[..., None, :]
        sin_s = np.sin(s)[..., None, :]
        out = ((x @ _transpose(Yh)) * cos_s + X * sin_s) @ Yh
        return self._refresh(out)

    def log(self, x, y):
        """Horizontal velocity whose geodesic reaches span(y) from x.

        Uses ``L = (y - x M) M^{-1}`` with ``M = x^T y``; the singular
        values of L are the tangents of the principal angles, so
        ``log = Q arctan(S) R^T`` for the thin SVD ``L = Q S R^T``.
        Pairs at (or numerically near) the cut locus, where M is
        singular, are rejected.
        """
        Q, theta, Rh = self._log_factors(x, y)
        return (Q * theta[..., None, :]) @ Rh

    def transport(self, x, y, v):
        """Parallel transport of ``v`` along the geodesic from x to y.

        With the geodesic velocity factored as ``Q arctan(S) R^T``, the
        transport along the geodesic is
        ``v + (-(x R) sin(T) + Q (cos(T) - 1)) Q^T v`` with
        ``T = arctan(S)``, expressed at the geodesic-endpoint
        representative; a final rotation re-expresses it in the frame of
        the caller's representative ``y``. An isometry of the tangent
        spaces.
        """
        self._check_horizontal(x, v)
        Q, theta, Rh = self._log_factors(x, y)
        w = _transpose(Q) @ v
        sin_t = np.sin(theta)[..., None, :]
        cos_t = np.cos(theta)[..., None, :]
        x_r = x @ _transpose(Rh)
        moved = v + (-x_r * sin_t + Q * (cos_t - 1.0)) @ w
        # endpoint representative of the geodesic; y = endpoint @ O
        endpoint = (x_r * cos_t + Q * sin_t) @ Rh
        o_u, _, o_vh = np.linalg.svd(_transpose(endpoint) @ y)
        return moved @ (o_u @ o_vh)

    def egrad_to_rgrad(self, x, g):
        """Horizontal projection ``(I - x x^T) g`` of a Euclidean gradient."""
        self._check_point_shape(x)
        if g.shape[-2:] != (self.n, self.p):
            raise ContractViolation(
                f"gradient shape {g.shape} does not match point shape {self.point_shape}"
            )
        return g - x @ (_transpose(x) @ g)

    def canonicalize(self, m):
        """Orthonormal representative of the column space of ``m``.

        Thin QR with the positive-diagonal-R sign convention; an input
        that is already orthonormal to machine precision is returned
        unchanged. Rank-deficient inputs are rejected.
        """
        m = np.asarray(m, dtype=float)
        self._check_point_shape(m)
        if self._drift(m) <= self._REFRESH_TOL:
            return m
        q, r = np.linalg.qr(m)
        diag = np.diagonal(r, axis1=-2, axis2=-1)
        scale = np.max(np.abs(diag), axis=-1, keepdims=True)
        if np.any(scale == 0.0) or np.any(np.abs(diag) < 1e-12 * scale):
            raise DomainError("matrix is rank deficient; no subspace representative")
        sign = np.where(diag < 0.0, -1.0, 1.0)
        return q * sign[..., None, :]

    # -- sampling -------------------------------------------------------------

    def random_point(self, rng):
        return self.canonicalize(rng.standard_normal((self.n, self.p)))

    def random_tangent(self, rng, x):
        v = self.egrad_to_rgrad(x, rng.standard_normal(x.shape))
        return v / np.linalg.norm(v, axis=(-2, -1), keepdims=True)

    # -- diagnostics ----------------------------------------------------------

    def curvature_profile(self, diameter: float = 1.0) -> CurvatureProfile:
        """Sectional-curvature range of Gr(n, p) for the zeta diagnostics.

        The curvature lies in [0, 2] when both p and n - p are at least
        2, and the manifold has constant curvature 1 otherwise (it is
        then a real projective space).
        """
        kappa_max = 2.0 if min(self.p, self.n - self.p) >= 2 else 1.0
        return CurvatureProfile(kappa_min=0.0, kappa_max=kappa_max, diameter=diameter)

    # -- internals ------------------------------------------------------------

    def _log_factors(self, x, y):
        self._check_point_shape(x)
        self._check_point_shape(y)
        m = _transpose(x) @ y
        try:
            # L = (y - x m) m^{-1}, solved as m^T L^T = (y - x m)^T
            l = _transpose(np.linalg.solve(_transpose(m), _transpose(y - x @ m)))
        except np.linalg.LinAlgError as err:
            raise DomainError(
                "subspaces are at the cut locus (a principal angle equals pi/2)"
            ) from err
        Q, s, Rh = np.linalg.svd(l, full_matrices=False)
        if np.any(s > self._CUT_LOCUS_TAN):
            raise DomainError(
                "subspaces are numerically at the cut locus "
                "(a principal angle is within ~1e-8 of pi/2)"
            )
        return Q, np.arctan(s), Rh

    def _drift(self, u):
        gram = _transpose(u) @ u
        eye = np.eye(self.p)
        return float(np.max(np.abs(gram - eye)))

    def _refresh(self, u):
        if self._drift(u) > self._REFRESH_TOL:
            q, r = np.linalg.qr(u)
            diag = np.diagonal(r, axis1=-2, axis2=-1)
            sign = np.where(diag < 0.0, -1.0, 1.0)
            return q * sign[..., None, :]
        return u

    def _check_point_shape(self, a):
        if a.shape[-2:] != (self.n, self.p):
            raise ContractViolation(
                f"expected arrays of shape (..., {self.n}, {self.p}), got {a.shape}"
            )

    def _check_horizontal(self, x, v):
        if v.shape[-2:] != (self.n, self.p):
            raise ContractViolation(
                f"tangent shape {v.shape} does not match point shape {self.point_shape}"
            )
        residual = np.max(np.abs(_transpose(x) @ v))
        if residual > self.HORIZONTAL_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise ContractViolation(
                f"vector is not horizontal at the base point (|U^T xi| = {residual:.3e})"
            )

    def _check_tangent(self, x, v):
        super()._check_tangent(x, v)
        residual = np.max(np.abs(_transpose(x) @ v))
        if residual > self.ORTHONORMAL_TOL * max(1.0, float(np.max(np.abs(v)))):
            raise ContractViolation(
                f"vector is not horizontal at the base point (|U^T xi| = {residual:.3e})"
            )

    def __repr__(self):
        return f"Grassmann({self.n}, {self.p})"
