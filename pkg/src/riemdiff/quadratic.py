"""Noisy quadratic cost oracle on flat space.

The standard testbed for validating the distributed algorithms against
closed forms: agent k owns J_k(w) = 0.5 (w - b_k)^T diag(a_k) (w - b_k)
with heterogeneous targets b_k, and observes its gradient through
additive Gaussian noise. Strong convexity gives the gradient-dominance
property, a unique consensus optimum with a closed form, and a
separable optimum value of zero when every agent sits at its own
target.
"""

from __future__ import annotations

import numpy as np

from riemdiff.diffusion import CostOracle
from riemdiff.errors import ContractViolation
from riemdiff.manifolds.base import ManifoldPoint, TangentVector
from riemdiff.manifolds.euclidean import Euclidean

__all__ = ["QuadraticCostOracle", "random_quadratic_oracle"]

_NOISE_STREAM = 0x51


class QuadraticCostOracle(CostOracle):
    """Heterogeneous diagonal quadratics with additive gradient noise.

    The noise realization for round t is drawn from a stream keyed by
    (run seed, t), so it is identical across algorithms sharing a run
    seed and independent across rounds and agents.
    """

    def __init__(
        self,
        targets: np.ndarray,
        curvatures: np.ndarray,
        noise_sigma: float,
        seed: int = 0,
    ):
        targets = np.asarray(targets, dtype=float)
        curvatures = np.asarray(curvatures, dtype=float)
        if targets.ndim != 2:
            raise ContractViolation(f"targets must be (K, n), got {targets.shape}")
        if curvatures.shape != targets.shape:
            raise ContractViolation(
                f"curvatures shape {curvatures.shape} != targets shape {targets.shape}"
            )
        if np.any(curvatures <= 0):
            raise ContractViolation("curvatures must be positive")
        if noise_sigma < 0:
            raise ContractViolation(f"noise_sigma must be nonnegative, got {noise_sigma}")
        self.num_agents, dim = targets.shape
        self.manifold = Euclidean(dim)
        self.targets = targets
        self.curvatures = curvatures
        self.noise_sigma = noise_sigma
        self._run_seed = seed

    def begin_run(self, seed: int) -> None:
        self._run_seed = seed

    def _noise(self, t: int) -> np.ndarray:
        if self.noise_sigma == 0.0:
            return np.zeros_like(self.targets)
        rng = np.random.default_rng(
            np.random.SeedSequence((self._run_seed, t, _NOISE_STREAM))
        )
        return self.noise_sigma * rng.standard_normal(self.targets.shape)

    def stochastic_rgrad(self, agent, t, w):
        g = self.curvatures[agent] * (w.coordinates - self.targets[agent])
        return TangentVector(w, g + self._noise(t)[agent])

    def stochastic_rgrad_all(self, t, w_stack):
        return self.curvatures * (w_stack - self.targets) + self._noise(t)

    def agent_cost(self, agent, w):
        diff = w.coordinates - self.targets[agent]
        return float(0.5 * np.sum(self.curvatures[agent] * diff**2))

    def agent_rgrad(self, agent, w):
        return TangentVector(
            w, self.curvatures[agent] * (w.coordinates - self.targets[agent])
        )

    def agent_costs_all(self, w_stack):
        diff = w_stack - self.targets
        return 0.5 * np.sum(self.curvatures * diff**2, axis=1)

    def agent_rgrads_all(self, w_stack):
        return self.curvatures * (w_stack - self.targets)

    def batch_cost(self, w):
        diff = w.coordinates - self.targets
        return float(0.5 * np.mean(np.sum(self.curvatures * diff**2, axis=1)))

    def batch_rgrad(self, w):
        g = np.mean(self.curvatures * (w.coordinates - self.targets), axis=0)
        return TangentVector(w, g)

    def consensus_optimum(self) -> ManifoldPoint:
        """Minimizer of the network-average cost over a single shared point."""
        coords = np.sum(self.curvatures * self.targets, axis=0) / np.sum(
            self.curvatures, axis=0
        )
        return self.manifold.point(coords)

    @property
    def separable_optimum_value(self) -> float:
        """Average cost when every agent sits at its own target: zero."""
        return 0.0


def random_quadratic_oracle(
    num_agents: int,
    dim: int,
    seed: int,
    target_spread: float = 1.0,
    curvature_range: tuple[float, float] = (1.0, 1.0),
    noise_sigma: float = 0.5,
) -> QuadraticCostOracle:
    """Draw a heterogeneous quadratic testbed instance."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x9D)))
    targets = target_spread * rng.standard_normal((num_agents, dim))
    lo, hi = curvature_range
    curvatures = rng.uniform(lo, hi, size=(num_agents, dim))
    return QuadraticCostOracle(targets, curvatures, noise_sigma, seed=seed)
