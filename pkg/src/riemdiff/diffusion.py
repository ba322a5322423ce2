"""Decentralized diffusion adaptation on manifolds, plus baselines.

Each synchronous round has two phases. In the adaptation phase every
agent takes a Riemannian stochastic gradient step from its current
iterate,

    phi_k = exp_{w_k}(-mu * g_k),

and in the combination phase it averages its neighbors' intermediate
iterates on its own tangent space,

    w_k = exp_{phi_k}(alpha * sum_l c_{lk} log_{phi_k}(phi_l)).

The non-cooperative baseline skips the combination phase entirely
(equivalently alpha = 0), and the centralized reference solver runs
full-batch Riemannian gradient descent with backtracking on the pooled
data to produce the stationary point used by MSD curves.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from riemdiff.errors import ContractViolation, ConvergenceError, DomainError
from riemdiff.manifolds.base import Manifold, ManifoldPoint, TangentVector
from riemdiff.manifolds.curvature import CurvatureProfile, zeta_constants
from riemdiff.metrics import (
    METRIC_NAMES,
    MetricTrace,
    TraceRow,
    frechet_mean_array,
    stack_points,
)
from riemdiff.network import NetworkTopology

__all__ = [
    "StepSizes",
    "AgentNetworkState",
    "CostOracle",
    "MetricHooks",
    "StepSizeWarning",
    "check_step_admissibility",
    "adapt_step",
    "combine_step",
    "run_diffusion",
    "run_noncooperative",
    "solve_reference",
]


class StepSizeWarning(UserWarning):
    """The combination step size lies outside the provable contraction range."""


@dataclass(frozen=True)
class StepSizes:
    """Constant step sizes: ``mu`` for adaptation, ``alpha`` for combination.

    ``alpha = 0`` disables the combination phase and reproduces the
    non-cooperative baseline exactly.
    """

    mu: float
    alpha: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ContractViolation(f"mu must be positive, got {self.mu}")
        if not 0 <= self.alpha <= 1:
            raise ContractViolation(f"alpha must lie in [0, 1], got {self.alpha}")


def check_step_admissibility(steps: StepSizes, profile: CurvatureProfile) -> None:
    """Warn when alpha falls outside (0, zeta2/zeta1) for the given curvature.

    The contraction guarantee of the combination step requires alpha in
    that interval; outside it the algorithm still runs, so this is a
    diagnostic rather than an error (the interval depends on a diameter
    bound that cannot be verified at runtime).
    """
    zeta1, zeta2 = zeta_constants(profile)
    upper = zeta2 / zeta1
    if not 0 < steps.alpha < upper:
        warnings.warn(
            f"alpha={steps.alpha} outside the provable contraction range "
            f"(0, {upper:.4f}) for curvature in [{profile.kappa_min}, "
            f"{profile.kappa_max}], diameter {profile.diameter}",
            StepSizeWarning,
            stacklevel=2,
        )


@dataclass
class AgentNetworkState:
    """Per-agent iterates of one synchronous round."""

    w: list[ManifoldPoint]
    phi: list[ManifoldPoint]

    def __post_init__(self):
        if len(self.w) != len(self.phi):
            raise ContractViolation(
                f"{len(self.w)} iterates vs {len(self.phi)} intermediates"
            )

    @property
    def num_agents(self) -> int:
        return len(self.w)


class CostOracle(ABC):
    """Per-agent cost and gradient provider.

    ``stochastic_rgrad`` must be a deterministic function of
    ``(agent, round, point)`` and the seed fixed by ``begin_run`` so
    that runs are reproducible and baselines can be paired on identical
    realizations. Batch quantities pool all agents' data and are used
    by the reference solver and the gradient certificate.
    """

    manifold: Manifold
    num_agents: int

    def begin_run(self, seed: int) -> None:
        """Fix the per-run randomness; a no-op for data-driven oracles."""

    @abstractmethod
    def stochastic_rgrad(self, agent: int, t: int, w: ManifoldPoint) -> TangentVector:
        """Riemannian stochastic gradient of agent's cost at round ``t``."""

    @abstractmethod
    def agent_cost(self, agent: int, w: ManifoldPoint) -> float:
        """Agent's full (expected or empirical) cost at ``w``."""

    @abstractmethod
    def agent_rgrad(self, agent: int, w: ManifoldPoint) -> TangentVector:
        """Agent's full Riemannian gradient at ``w``."""

    def batch_cost(self, w: ManifoldPoint) -> float:
        """Network-average cost at a single shared point."""
        return float(
            np.mean([self.agent_cost(k, w) for k in range(self.num_agents)])
        )

    def batch_rgrad(self, w: ManifoldPoint) -> TangentVector:
        """Network-average Riemannian gradient at a single shared point."""
        total = np.zeros(self.manifold.point_shape)
        for k in range(self.num_agents):
            total += self.agent_rgrad(k, w).components
        return TangentVector(w, total / self.num_agents)

    # stacked fast paths; defaults fall back to per-agent calls

    def stochastic_rgrad_all(self, t: int, w_stack: np.ndarray) -> np.ndarray:
        out = np.empty_like(w_stack)
        for k in range(self.num_agents):
            point = ManifoldPoint(self.manifold, w_stack[k])
            out[k] = self.stochastic_rgrad(k, t, point).components
        return out

    def agent_costs_all(self, w_stack: np.ndarray) -> np.ndarray:
        return np.array(
            [
                self.agent_cost(k, ManifoldPoint(self.manifold, w_stack[k]))
                for k in range(self.num_agents)
            ]
        )

    def agent_rgrads_all(self, w_stack: np.ndarray) -> np.ndarray:
        out = np.empty_like(w_stack)
        for k in range(self.num_agents):
            point = ManifoldPoint(self.manifold, w_stack[k])
            out[k] = self.agent_rgrad(k, point).components
        return out


@dataclass
class MetricHooks:
    """What to record each round, and what the metrics need.

    ``reference`` is required for msd; ``topology`` is only needed to
    record the consensus bias of runs that do not themselves own a
    topology (the non-cooperative baseline). ``iterate_callback``
    receives ``(t, state)`` after every round, for tests and custom
    instrumentation.
    """

    metrics: frozenset[str] = field(default_factory=frozenset)
    reference: ManifoldPoint | None = None
    topology: NetworkTopology | None = None
    frechet_tol: float = 1e-10
    frechet_max_iter: int = 200
    iterate_callback: Callable[[int, AgentNetworkState], None] | None = None

    def __post_init__(self):
        self.metrics = frozenset(self.metrics)
        unknown = self.metrics - set(METRIC_NAMES)
        if unknown:
            raise ContractViolation(f"unknown metrics: {sorted(unknown)}")
        if "msd" in self.metrics and self.reference is None:
            raise ContractViolation("msd requires a reference point")


# -- single steps ---------------------------------------------------------------


def adapt_step(
    state: AgentNetworkState, oracle: CostOracle, mu: float, t: int
) -> list[ManifoldPoint]:
    """One adaptation phase: ``phi_k = exp_{w_k}(-mu g_k)`` for every agent."""
    manifold, w_stack = stack_points(state.w)
    phi_stack = _adapt_arrays(manifold, oracle, w_stack, mu, t)
    return [ManifoldPoint(manifold, phi_stack[k]) for k in range(len(state.w))]


def combine_step(
    phi: list[ManifoldPoint], topology: NetworkTopology, alpha: float
) -> list[ManifoldPoint]:
    """One combination phase: tangent-space averaging of neighbors."""
    manifold, phi_stack = stack_points(phi)
    if len(phi) != topology.num_agents:
        raise ContractViolation(
            f"{len(phi)} intermediates for a {topology.num_agents}-agent topology"
        )
    w_stack = _combine_arrays(manifold, phi_stack, topology, alpha)
    return [ManifoldPoint(manifold, w_stack[k]) for k in range(len(phi))]


def _adapt_arrays(manifold, oracle, w_stack, mu, t):
    grads = oracle.stochastic_rgrad_all(t, w_stack)
    try:
        return manifold.exp(w_stack, -mu * grads)
    except DomainError:
        for k in range(w_stack.shape[0]):  # identify the offending agent
            try:
                manifold.exp(w_stack[k], -mu * grads[k])
            except DomainError as err:
                raise DomainError(f"adaptation step of agent {k} failed: {err}") from err
        raise


def _combine_arrays(manifold, phi_stack, topology, alpha):
    if alpha == 0.0:
        return phi_stack
    dst, src, wts = topology.neighbor_index
    try:
        logs = manifold.log(phi_stack[dst], phi_stack[src])
    except DomainError:
        for a, b in zip(dst, src):  # identify the offending pair
            try:
                manifold.log(phi_stack[a], phi_stack[b])
            except DomainError as err:
                raise DomainError(
                    f"combination step failed between agents {a} and {b}: {err}"
                ) from err
        raise
    num_agents = phi_stack.shape[0]
    pulls = np.zeros((num_agents, logs.shape[0]))
    pulls[dst, np.arange(logs.shape[0])] = wts
    tangents = alpha * (pulls @ logs.reshape(logs.shape[0], -1)).reshape(phi_stack.shape)
    return manifold.exp(phi_stack, tangents)


# -- full runs -------------------------------------------------------------------


def run_diffusion(
    oracle: CostOracle,
    topology: NetworkTopology,
    manifold: Manifold,
    init: list[ManifoldPoint],
    steps: StepSizes,
    num_rounds: int,
    seed: int,
    metric_hooks: MetricHooks | None = None,
) -> MetricTrace:
    """Run ``num_rounds`` synchronous rounds of adapt-then-combine.

    Deterministic given ``(oracle, seed)``; per-round errors abort the
    run with the round index attached.
    """
    return _run(oracle, topology, manifold, init, steps, num_rounds, seed, metric_hooks)


def run_noncooperative(
    oracle: CostOracle,
    manifold: Manifold,
    init: list[ManifoldPoint],
    mu: float,
    num_rounds: int,
    seed: int,
    metric_hooks: MetricHooks | None = None,
) -> MetricTrace:
    """Independent per-agent stochastic gradient descent (no combination)."""
    steps = StepSizes(mu=mu, alpha=0.0)
    return _run(oracle, None, manifold, init, steps, num_rounds, seed, metric_hooks)


def _run(oracle, topology, manifold, init, steps, num_rounds, seed, metric_hooks):
    if num_rounds < 1:
        raise ContractViolation(f"need at least one round, got {num_rounds}")
    if topology is not None and len(init) != topology.num_agents:
        raise ContractViolation(
            f"{len(init)} initial points for a {topology.num_agents}-agent topology"
        )
    if len(init) != oracle.num_agents:
        raise ContractViolation(
            f"{len(init)} initial points for a {oracle.num_agents}-agent oracle"
        )
    _, w_stack = stack_points(init)
    oracle.begin_run(seed)
    recorder = _Recorder(metric_hooks, manifold, topology, oracle)
    for t in range(1, num_rounds + 1):
        try:
            phi_stack = _adapt_arrays(manifold, oracle, w_stack, steps.mu, t)
            if topology is not None and steps.alpha > 0.0:
                w_stack = _combine_arrays(manifold, phi_stack, topology, steps.alpha)
            else:
                w_stack = phi_stack
            recorder.record(t, w_stack, phi_stack)
        except (DomainError, ContractViolation, ConvergenceError) as err:
            raise type(err)(f"round {t}: {err}") from err
    return recorder.trace


class _Recorder:
    """Assembles one MetricTrace, warm-starting the Frechet mean across rounds.

    The consensus bias is recorded for the intermediate iterates (the
    quantity the combination step descends on); every other metric is
    evaluated at the combined iterates.
    """

    def __init__(self, hooks: MetricHooks | None, manifold, topology, oracle):
        self.hooks = hooks if hooks is not None else MetricHooks()
        self.manifold = manifold
        self.oracle = oracle
        self.topology = self.hooks.topology or topology
        if "consensus_bias" in self.hooks.metrics and self.topology is None:
            raise ContractViolation("consensus_bias requires a topology")
        self.trace = MetricTrace()
        self._mean = None

    def record(self, t: int, w_stack, phi_stack) -> None:
        hooks = self.hooks
        values: dict[str, float] = {}
        if "msd" in hooks.metrics:
            d = self.manifold.dist(hooks.reference.coordinates, w_stack)
            values["msd"] = float(np.mean(np.atleast_1d(d) ** 2))
        if "frechet_variance" in hooks.metrics:
            mean = frechet_mean_array(
                self.manifold,
                w_stack,
                tol=hooks.frechet_tol,
                max_iter=hooks.frechet_max_iter,
                init=self._mean,
            )
            self._mean = mean
            d = np.atleast_1d(self.manifold.dist(mean, w_stack))
            values["frechet_variance"] = float(np.sum(d**2))
        if "consensus_bias" in hooks.metrics:
            dst, src, wts = self.topology.neighbor_index
            d = self.manifold.dist(phi_stack[dst], phi_stack[src])
            values["consensus_bias"] = float(np.sum(wts * d**2))
        if "cost" in hooks.metrics:
            values["cost"] = float(np.mean(self.oracle.agent_costs_all(w_stack)))
        if "grad_norm_sq" in hooks.metrics:
            grads = self.oracle.agent_rgrads_all(w_stack)
            k = grads.shape[0]
            values["grad_norm_sq"] = float(np.sum(grads**2)) / (k * k)
        self.trace.append(TraceRow(t=t, **values))
        if hooks.iterate_callback is not None:
            state = AgentNetworkState(
                w=[ManifoldPoint(self.manifold, w_stack[k]) for k in range(len(w_stack))],
                phi=[
                    ManifoldPoint(self.manifold, phi_stack[k])
                    for k in range(len(phi_stack))
                ],
            )
            hooks.iterate_callback(t, state)


# -- centralized reference --------------------------------------------------------


def solve_reference(
    oracle: CostOracle,
    manifold: Manifold,
    init: ManifoldPoint,
    mu_ref: float = 1.0,
    max_iters: int = 10_000,
    grad_tol: float = 1e-6,
) -> ManifoldPoint:
    """Stationary point of the pooled batch cost, from the shared initialization.

    Full-batch Riemannian gradient descent with backtracking: each
    iteration starts from twice the previously accepted step (capped at
    ``mu_ref``) and halves it while the cost increases. Returns the
    first iterate whose batch gradient norm is at most ``grad_tol``;
    if the budget runs out first, warns and returns the last iterate.
    Raises after 20 consecutive iterations without an accepted decrease.
    """
    x = init
    cost = oracle.batch_cost(x)
    step = mu_ref
    stalled = 0
    for _ in range(max_iters):
        grad = oracle.batch_rgrad(x)
        if grad.norm() <= grad_tol:
            return x
        step = min(mu_ref, 2.0 * step)
        accepted = False
        while step > 1e-20:
            candidate = ManifoldPoint(
                manifold, manifold.exp(x.coordinates, -step * grad.components)
            )
            candidate_cost = oracle.batch_cost(candidate)
            if candidate_cost <= cost:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            stalled += 1
            if stalled >= 20:
                raise ConvergenceError(
                    "reference solver stalled: no descent step found in 20 "
                    "consecutive iterations",
                    last_iterate=x,
                    residual=grad.norm(),
                )
            step = mu_ref
            continue
        stalled = 0
        x, cost = candidate, candidate_cost
    warnings.warn(
        f"reference solver hit the iteration budget ({max_iters}) with gradient "
        f"norm {oracle.batch_rgrad(x).norm():.3e} > {grad_tol}",
        RuntimeWarning,
        stacklevel=2,
    )
    return x
