"""Agent graphs, doubly stochastic combination weights, and mixing rates.

The combination step averages neighbors through a symmetric doubly
stochastic weight matrix supported on a connected undirected graph.
Its consensus speed is governed by the mixing rate, the spectral radius
of the weight matrix after removing the uniform-averaging component;
connectivity keeps it strictly below one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from riemdiff.errors import ContractViolation, ConvergenceError, DomainError

__all__ = [
    "AgentGraph",
    "NetworkTopology",
    "random_connected_graph",
    "metropolis_weights",
    "sinkhorn_uniform_weights",
    "mixing_rate",
    "topology_to_json",
    "topology_from_json",
]

_SUM_TOL = 1e-12
_SYM_TOL = 1e-12


@dataclass(frozen=True)
class AgentGraph:
    """Simple undirected connected graph over agents 0..K-1.

    Edges are unordered pairs stored as (i, j) with i < j; self-loops
    are never stored (self-weights arise from the weight rules).
    """

    num_agents: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.num_agents < 2:
            raise ContractViolation(f"need at least 2 agents, got {self.num_agents}")
        for i, j in self.edges:
            if not (0 <= i < j < self.num_agents):
                raise ContractViolation(f"invalid edge ({i}, {j})")
        if not self._connected():
            raise ContractViolation("agent graph is not connected")

    def degree(self, k: int) -> int:
        return sum(1 for i, j in self.edges if k in (i, j))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_agents, self.num_agents), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def _connected(self) -> bool:
        return len(_component_of(0, self.num_agents, self.edges)) == self.num_agents


def _component_of(start: int, num_agents: int, edges) -> set[int]:
    neighbors: dict[int, list[int]] = {k: [] for k in range(num_agents)}
    for i, j in edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    seen = {start}
    stack = [start]
    while stack:
        for nb in neighbors[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


@dataclass(frozen=True)
class NetworkTopology:
    """A graph together with its symmetric doubly stochastic weight matrix."""

    graph: AgentGraph
    weights: np.ndarray
    mixing_rate: float

    def __post_init__(self):
        _validate_weights(self.weights, self.graph)

    @property
    def num_agents(self) -> int:
        return self.graph.num_agents

    @cached_property
    def neighbor_index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat (target_agent, neighbor_agent, weight) arrays over ordered
        pairs with positive off-diagonal weight; used by batched averaging."""
        dst, src, wts = [], [], []
        k_count = self.num_agents
        for k in range(k_count):
            for ell in range(k_count):
                if ell != k and self.weights[ell, k] > 0.0:
                    dst.append(k)
                    src.append(ell)
                    wts.append(self.weights[ell, k])
        return np.asarray(dst), np.asarray(src), np.asarray(wts)


def _validate_weights(c: np.ndarray, graph: AgentGraph) -> None:
    k = graph.num_agents
    if c.shape != (k, k):
        raise ContractViolation(f"weight matrix shape {c.shape}, expected {(k, k)}")
    if np.any(c < 0):
        raise ContractViolation("combination weights must be nonnegative")
    if np.max(np.abs(c - c.T)) > 1e-10:
        raise ContractViolation("weight matrix is not symmetric")
    row = np.abs(c.sum(axis=1) - 1.0).max()
    col = np.abs(c.sum(axis=0) - 1.0).max()
    if max(row, col) > 1e-10:
        raise ContractViolation(
            f"weight matrix is not doubly stochastic (max sum deviation {max(row, col):.3e})"
        )
    allowed = graph.adjacency()
    np.fill_diagonal(allowed, True)
    if np.any((c > 0) & ~allowed):
        raise ContractViolation("positive weight outside the graph support")


def random_connected_graph(num_agents: int, edge_prob: float, seed: int) -> AgentGraph:
    """Erdos-Renyi draw repaired to connectivity.

    Every candidate edge is kept with probability ``edge_prob``; while
    the result is disconnected, a uniformly random edge joining two
    distinct components is added. Deterministic given the seed.
    """
    if num_agents < 2:
        raise ContractViolation(f"need at least 2 agents, got {num_agents}")
    if not 0 < edge_prob <= 1:
        raise ContractViolation(f"edge_prob must lie in (0, 1], got {edge_prob}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    edges = {
        (i, j)
        for i in range(num_agents)
        for j in range(i + 1, num_agents)
        if rng.random() < edge_prob
    }
    while True:
        component = _component_of(0, num_agents, edges)
        if len(component) == num_agents:
            break
        inside = sorted(component)
        outside = sorted(set(range(num_agents)) - component)
        i = int(rng.choice(inside))
        j = int(rng.choice(outside))
        edges.add((min(i, j), max(i, j)))
    return AgentGraph(num_agents, frozenset(edges))


def metropolis_weights(graph: AgentGraph) -> NetworkTopology:
    """Metropolis-Hastings combination weights.

    Edge (l, k) receives 1 / (1 + max(deg l, deg k)); each diagonal
    entry absorbs the remainder of its column. Symmetric and doubly
    stochastic by construction.
    """
    k_count = graph.num_agents
    deg = [graph.degree(k) for k in range(k_count)]
    c = np.zeros((k_count, k_count))
    for i, j in graph.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        c[i, j] = c[j, i] = w
    np.fill_diagonal(c, 1.0 - c.sum(axis=0))
    return NetworkTopology(graph, c, mixing_rate(c))


def sinkhorn_uniform_weights(
    graph: AgentGraph,
    seed: int,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> NetworkTopology:
    """Random positive weights balanced to doubly stochastic.

    Draws i.i.d. uniform(0, 1) weights on edges and self-loops,
    symmetrizes, then alternates row and column normalization until the
    largest row/column-sum deviation falls below ``tol``; a final
    symmetrization plus one symmetric rescaling pass restores exact
    symmetry without disturbing the sums.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k_count = graph.num_agents
    c = np.diag(rng.uniform(size=k_count))
    for i, j in graph.edges:
        c[i, j] = c[j, i] = rng.uniform()
    deviation = np.inf
    for _ in range(max_iter):
        c /= c.sum(axis=1, keepdims=True)
        c /= c.sum(axis=0, keepdims=True)
        deviation = max(
            np.abs(c.sum(axis=1) - 1.0).max(), np.abs(c.sum(axis=0) - 1.0).max()
        )
        if deviation < tol:
            break
    else:
        raise ConvergenceError(
            f"Sinkhorn balancing did not reach tol={tol} in {max_iter} iterations",
            residual=deviation,
        )
    c = 0.5 * (c + c.T)
    scale = np.sqrt(c.sum(axis=1))
    c /= np.outer(scale, scale)
    c = 0.5 * (c + c.T)
    return NetworkTopology(graph, c, mixing_rate(c))


def mixing_rate(weights: np.ndarray) -> float:
    """Spectral radius of ``C - (1/K) 1 1^T``; below 1 for connected graphs."""
    c = np.asarray(weights, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ContractViolation(f"weight matrix must be square, got shape {c.shape}")
    if np.max(np.abs(c - c.T)) > 1e-10:
        raise ContractViolation("weight matrix is not symmetric")
    k = c.shape[0]
    sums = np.concatenate([c.sum(axis=0) - 1.0, c.sum(axis=1) - 1.0])
    if np.max(np.abs(sums)) > 1e-10:
        raise ContractViolation("weight matrix is not doubly stochastic")
    deviation = c - np.full((k, k), 1.0 / k)
    return float(np.max(np.abs(np.linalg.eigvalsh(deviation))))


def topology_to_json(topology: NetworkTopology) -> str:
    """Serialize a topology (edge list, dense weights, mixing rate)."""
    payload = {
        "num_agents": topology.num_agents,
        "edges": sorted(map(list, topology.graph.edges)),
        "weights": topology.weights.tolist(),
        "mixing_rate": topology.mixing_rate,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def topology_from_json(text: str) -> NetworkTopology:
    payload = json.loads(text)
    graph = AgentGraph(
        payload["num_agents"],
        frozenset(tuple(edge) for edge in payload["edges"]),
    )
    weights = np.asarray(payload["weights"], dtype=float)
    lam = float(payload["mixing_rate"])
    if abs(lam - mixing_rate(weights)) > 1e-9:
        raise DomainError("stored mixing rate disagrees with the weight matrix")
    return NetworkTopology(graph, weights, lam)
