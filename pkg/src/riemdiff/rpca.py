"""Robust subspace estimation (robust PCA) on the Grassmann manifold.

Each agent maximizes the expected robustified projection energy of its
data stream, i.e. minimizes

    J_k(U) = -E{ Q_delta(||U^T x_k||) },

where Q_delta grows linearly above the threshold delta and
quadratically below it, capping the influence of large outliers:

    Q_delta(p) = p                        for p >= delta,
                 p^2 / (2 delta) + delta/2 for p < delta.

The module also provides the synthetic data protocol (Gaussian draw
with the spectrum reset to a geometric decay), uniform-cube outlier
injection, and an IDX-format image loader for the real-data experiment.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from riemdiff.diffusion import CostOracle
from riemdiff.errors import ContractViolation, DomainError, IdxFormatError
from riemdiff.manifolds.base import ManifoldPoint, TangentVector
from riemdiff.manifolds.grassmann import Grassmann

__all__ = [
    "q_delta",
    "euclid_grad",
    "stochastic_rgrad",
    "AgentDataset",
    "synth_data",
    "inject_outliers",
    "load_mnist",
    "partition_mnist",
    "RobustPcaOracle",
    "save_dataset",
    "load_dataset",
]

_IMAGES_MAGIC = 0x00000803
_LABELS_MAGIC = 0x00000801


# -- cost and gradients ----------------------------------------------------------


def q_delta(p: float, delta: float) -> float:
    """Robustified magnitude: linear above the threshold, quadratic below.

    Continuous and once-differentiable at p = delta, with value at
    least delta / 2.
    """
    if delta <= 0:
        raise ContractViolation(f"delta must be positive, got {delta}")
    if p < 0:
        raise ContractViolation(f"projection magnitude must be nonnegative, got {p}")
    return float(p) if p >= delta else float(p * p / (2.0 * delta) + delta / 2.0)


def _q_delta_vec(p: np.ndarray, delta: float) -> np.ndarray:
    return np.where(p >= delta, p, p * p / (2.0 * delta) + delta / 2.0)


def euclid_grad(u: np.ndarray, x: np.ndarray, delta: float) -> np.ndarray:
    """Euclidean gradient of -Q_delta(||u^T x||) with respect to u.

    Both branches collapse to -x (x^T u) / max(||u^T x||, delta), which
    is continuous across the threshold and well defined at zero
    projection.
    """
    if delta <= 0:
        raise ContractViolation(f"delta must be positive, got {delta}")
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.ndim != 2 or x.shape != (u.shape[0],):
        raise ContractViolation(
            f"shape mismatch: representative {u.shape}, sample {x.shape}"
        )
    proj = x @ u
    denom = max(float(np.linalg.norm(proj)), delta)
    return -np.outer(x, proj) / denom


def stochastic_rgrad(u: ManifoldPoint, x: np.ndarray, delta: float) -> TangentVector:
    """Riemannian stochastic gradient: the projected Euclidean gradient."""
    g = euclid_grad(u.coordinates, x, delta)
    return TangentVector(u, u.manifold.egrad_to_rgrad(u.coordinates, g))


# -- datasets --------------------------------------------------------------------


@dataclass
class AgentDataset:
    """Per-agent sample streams with a shared round horizon.

    ``samples[k]`` holds agent k's columns in round order; round t
    (1-based) consumes column (t - 1) mod m_k, so any horizon is
    runnable even when subsets are shorter (real-data partitions cycle).
    """

    samples: list[np.ndarray]
    horizon: int
    outlier_mask: list[np.ndarray]

    def __post_init__(self):
        if self.horizon < 1:
            raise ContractViolation(f"horizon must be positive, got {self.horizon}")
        if len(self.samples) != len(self.outlier_mask):
            raise ContractViolation("samples and outlier_mask lengths differ")
        dims = {s.shape[0] for s in self.samples}
        if len(dims) != 1:
            raise ContractViolation(f"agents disagree on sample dimension: {dims}")
        for s, m in zip(self.samples, self.outlier_mask):
            if m.shape != (s.shape[1],):
                raise ContractViolation("outlier mask length differs from sample count")

    @property
    def num_agents(self) -> int:
        return len(self.samples)

    @property
    def dim(self) -> int:
        return self.samples[0].shape[0]

    def sample(self, agent: int, t: int) -> np.ndarray:
        return self.samples[agent][:, (t - 1) % self.samples[agent].shape[1]]

    def round_samples(self, t: int) -> np.ndarray:
        """All agents' round-t samples as a (K, n) stack."""
        return np.stack(
            [s[:, (t - 1) % s.shape[1]] for s in self.samples]
        )

    def with_horizon(self, horizon: int) -> "AgentDataset":
        return AgentDataset(self.samples, horizon, self.outlier_mask)


def synth_data(
    n: int,
    p: int,
    num_agents: int,
    horizon: int,
    spectrum_lambda: float = 0.8,
    seed: int = 0,
) -> tuple[np.ndarray, AgentDataset]:
    """Synthetic low-effective-rank data with a geometric spectrum.

    Draws an n x (horizon * K) standard Gaussian matrix, resets its
    singular values to {lambda^0, ..., lambda^(n-1)} through the thin
    SVD, shuffles the columns, and deals one column per agent per
    round. Returns the rebuilt matrix (pre-shuffle) and the per-agent
    split.
    """
    if not 0 < spectrum_lambda < 1:
        raise ContractViolation(
            f"spectrum_lambda must lie in (0, 1), got {spectrum_lambda}"
        )
    if not 1 <= p <= n:
        raise ContractViolation(f"need 1 <= p <= n, got n={n}, p={p}")
    total = horizon * num_agents
    if total < n:
        raise DomainError(
            f"need horizon * K >= n to realize an n-point spectrum, "
            f"got {horizon} * {num_agents} < {n}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5D)))
    s = rng.standard_normal((n, total))
    u, _, vt = np.linalg.svd(s, full_matrices=False)
    spectrum = spectrum_lambda ** np.arange(n)
    rebuilt = (u * spectrum) @ vt
    shuffled = rebuilt[:, rng.permutation(total)]
    samples = [np.ascontiguousarray(shuffled[:, k::num_agents]) for k in range(num_agents)]
    masks = [np.zeros(horizon, dtype=bool) for _ in range(num_agents)]
    return rebuilt, AgentDataset(samples, horizon, masks)


def inject_outliers(dataset: AgentDataset, count: int, seed: int) -> AgentDataset:
    """Replace ``count`` random samples per agent with uniform-cube outliers.

    Replacement (rather than appending) keeps the horizon unchanged.
    The input dataset is left untouched.
    """
    if count < 0:
        raise ContractViolation(f"outlier count must be nonnegative, got {count}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x0F)))
    samples, masks = [], []
    for s, m in zip(dataset.samples, dataset.outlier_mask):
        num_cols = s.shape[1]
        if count > num_cols:
            raise ContractViolation(
                f"cannot replace {count} of {num_cols} samples"
            )
        s = s.copy()
        m = m.copy()
        idx = rng.choice(num_cols, size=count, replace=False)
        s[:, idx] = rng.uniform(size=(dataset.dim, count))
        m[idx] = True
        samples.append(s)
        masks.append(m)
    return AgentDataset(samples, dataset.horizon, masks)


# -- IDX image loading -----------------------------------------------------------


def _read_idx_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def load_mnist(images_path, labels_path=None) -> np.ndarray:
    """Load an IDX image file as a centered (pixels x images) float matrix.

    Pixels are scaled to [0, 1] and each pixel row is mean-centered.
    When ``labels_path`` is given, the label file is parsed too and its
    record count is checked against the image count.
    """
    raw = _read_idx_bytes(images_path)
    if len(raw) < 16:
        raise IdxFormatError("image file header is truncated", byte_offset=len(raw))
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != _IMAGES_MAGIC:
        raise IdxFormatError(
            f"bad image magic number 0x{magic:08x}, expected 0x{_IMAGES_MAGIC:08x}",
            byte_offset=0,
        )
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise IdxFormatError(
            f"image data is truncated: expected {expected} bytes", byte_offset=len(raw)
        )
    pixels = np.frombuffer(raw[16:expected], dtype=np.uint8)
    data = pixels.reshape(count, rows * cols).T.astype(float) / 255.0
    data -= data.mean(axis=1, keepdims=True)
    if labels_path is not None:
        label_raw = _read_idx_bytes(labels_path)
        if len(label_raw) < 8:
            raise IdxFormatError(
                "label file header is truncated", byte_offset=len(label_raw)
            )
        label_magic, label_count = struct.unpack(">II", label_raw[:8])
        if label_magic != _LABELS_MAGIC:
            raise IdxFormatError(
                f"bad label magic number 0x{label_magic:08x}, "
                f"expected 0x{_LABELS_MAGIC:08x}",
                byte_offset=0,
            )
        if label_count != count:
            raise IdxFormatError(
                f"label count {label_count} differs from image count {count}",
                byte_offset=4,
            )
    return data


def partition_mnist(data: np.ndarray, num_agents: int, seed: int) -> AgentDataset:
    """Shuffle images and deal them into near-equal per-agent subsets.

    Subset sizes differ by at most one; the dataset horizon is the
    largest subset size, and shorter subsets cycle when consumed past
    their length.
    """
    n, total = data.shape
    if total < num_agents:
        raise ContractViolation(
            f"cannot split {total} samples across {num_agents} agents"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x3A)))
    order = rng.permutation(total)
    chunks = np.array_split(order, num_agents)
    samples = [np.ascontiguousarray(data[:, chunk]) for chunk in chunks]
    masks = [np.zeros(len(chunk), dtype=bool) for chunk in chunks]
    horizon = max(len(chunk) for chunk in chunks)
    return AgentDataset(samples, horizon, masks)


# -- cost oracle -----------------------------------------------------------------


class RobustPcaOracle(CostOracle):
    """Robust-PCA cost oracle over an agent dataset."""

    def __init__(self, dataset: AgentDataset, subspace_dim: int, delta: float = 0.1):
        if delta <= 0:
            raise ContractViolation(f"delta must be positive, got {delta}")
        self.dataset = dataset
        self.delta = delta
        self.manifold = Grassmann(dataset.dim, subspace_dim)
        self.num_agents = dataset.num_agents
        self._pooled = np.concatenate(dataset.samples, axis=1)

    def stochastic_rgrad(self, agent, t, w):
        return stochastic_rgrad(w, self.dataset.sample(agent, t), self.delta)

    def stochastic_rgrad_all(self, t, w_stack):
        x = self.dataset.round_samples(t)  # (K, n)
        proj = np.einsum("knp,kn->kp", w_stack, x)
        denom = np.maximum(np.linalg.norm(proj, axis=1), self.delta)
        g = -(x[:, :, None] * proj[:, None, :]) / denom[:, None, None]
        return g - w_stack @ (np.swapaxes(w_stack, -1, -2) @ g)

    def _cost_on(self, u, columns):
        norms = np.linalg.norm(u.T @ columns, axis=0)
        return float(-np.mean(_q_delta_vec(norms, self.delta)))

    def _grad_on(self, u, columns):
        proj = columns.T @ u  # (m, p)
        denom = np.maximum(np.linalg.norm(proj, axis=1), self.delta)
        g = -(columns @ (proj / denom[:, None])) / columns.shape[1]
        return g - u @ (u.T @ g)

    def agent_cost(self, agent, w):
        return self._cost_on(w.coordinates, self.dataset.samples[agent])

    def agent_rgrad(self, agent, w):
        return TangentVector(
            w, self._grad_on(w.coordinates, self.dataset.samples[agent])
        )

    def agent_costs_all(self, w_stack):
        return np.array(
            [
                self._cost_on(w_stack[k], self.dataset.samples[k])
                for k in range(self.num_agents)
            ]
        )

    def agent_rgrads_all(self, w_stack):
        return np.stack(
            [
                self._grad_on(w_stack[k], self.dataset.samples[k])
                for k in range(self.num_agents)
            ]
        )

    def batch_cost(self, w):
        return self._cost_on(w.coordinates, self._pooled)

    def batch_rgrad(self, w):
        return TangentVector(w, self._grad_on(w.coordinates, self._pooled))


# -- persistence -----------------------------------------------------------------


def save_dataset(dataset: AgentDataset, base_path, metadata: dict) -> None:
    """Write a dataset as ``<base>.npz`` plus a ``<base>.json`` sidecar."""
    base = Path(base_path)
    arrays = {}
    for k, (s, m) in enumerate(zip(dataset.samples, dataset.outlier_mask)):
        arrays[f"samples_{k}"] = s
        arrays[f"mask_{k}"] = m
    np.savez(base.with_suffix(".npz"), **arrays)
    sidecar = dict(metadata)
    sidecar["num_agents"] = dataset.num_agents
    sidecar["horizon"] = dataset.horizon
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_dataset(base_path) -> tuple[AgentDataset, dict]:
    base = Path(base_path)
    metadata = json.loads(base.with_suffix(".json").read_text())
    with np.load(base.with_suffix(".npz")) as archive:
        samples = [
            archive[f"samples_{k}"] for k in range(metadata["num_agents"])
        ]
        masks = [archive[f"mask_{k}"] for k in range(metadata["num_agents"])]
    return AgentDataset(samples, metadata["horizon"], masks), metadata
