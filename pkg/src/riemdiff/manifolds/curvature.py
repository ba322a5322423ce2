"""Curvature comparison constants for bounded-curvature manifolds.

The trigonometric comparison inequalities for geodesic triangles on a
manifold with sectional curvature in [kappa_min, kappa_max] and
diameter B involve two constants:

    zeta1 = B sqrt(-kappa_min) coth(B sqrt(-kappa_min))   (1 if kappa_min >= 0)
    zeta2 = B sqrt(kappa_max)  cot(B sqrt(kappa_max))     (1 if kappa_max <= 0)

They feed the contraction factor of the combination step,

    epsilon = -2 (1 - lambda) (zeta1 alpha^2 - zeta2 alpha) / (1 + C_kappa B^2)^2,

which is exposed purely as a diagnostic: the constant C_kappa has no
computable formula and defaults to 0 (exact on flat manifolds, where
epsilon = 2 (1 - lambda) alpha (1 - alpha)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from riemdiff.errors import DomainError

__all__ = ["CurvatureProfile", "zeta_constants", "epsilon_constant"]


@dataclass(frozen=True)
class CurvatureProfile:
    """Sectional-curvature range and geodesic diameter of the working region."""

    kappa_min: float
    kappa_max: float
    diameter: float

    def __post_init__(self):
        if self.kappa_min > self.kappa_max:
            raise DomainError(
                f"kappa_min={self.kappa_min} exceeds kappa_max={self.kappa_max}"
            )
        if self.diameter <= 0:
            raise DomainError(f"diameter must be positive, got {self.diameter}")
        if self.kappa_max > 0 and self.diameter >= math.pi / (
            2 * math.sqrt(self.kappa_max)
        ):
            raise DomainError(
                f"diameter {self.diameter} is not admissible: must be below "
                f"pi / (2 sqrt(kappa_max)) = {math.pi / (2 * math.sqrt(self.kappa_max)):.6f}"
            )


def zeta_constants(profile: CurvatureProfile) -> tuple[float, float]:
    """Comparison constants (zeta1 >= 1, 0 < zeta2 <= 1) for a curvature profile."""
    b = profile.diameter
    if profile.kappa_min >= 0:
        zeta1 = 1.0
    else:
        u = b * math.sqrt(-profile.kappa_min)
        zeta1 = u / math.tanh(u)
    if profile.kappa_max <= 0:
        zeta2 = 1.0
    else:
        u = b * math.sqrt(profile.kappa_max)
        if u >= math.pi / 2:
            raise DomainError(
                f"B sqrt(kappa_max) = {u:.6f} >= pi/2; cot is undefined there"
            )
        zeta2 = u / math.tan(u)
    return zeta1, zeta2


def epsilon_constant(
    zeta1: float,
    zeta2: float,
    alpha: float,
    lam: float,
    c_kappa: float = 0.0,
    diameter: float = 1.0,
) -> float:
    """Per-round Frechet-variance contraction margin of the combination step.

    Positive for any combination step size ``alpha`` in (0, zeta2/zeta1)
    and mixing rate ``lam`` in [0, 1).
    """
    if not 0 <= lam < 1:
        raise DomainError(f"mixing rate must lie in [0, 1), got {lam}")
    upper = zeta2 / zeta1
    if not 0 < alpha < upper:
        raise DomainError(
            f"step size alpha={alpha} outside the admissible interval (0, {upper:.6f})"
        )
    if c_kappa < 0:
        raise DomainError(f"c_kappa must be nonnegative, got {c_kappa}")
    return (
        -2.0 * (1.0 - lam) * (zeta1 * alpha**2 - zeta2 * alpha)
        / (1.0 + c_kappa * diameter**2) ** 2
    )
