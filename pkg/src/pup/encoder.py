"""One-layer graph-convolutional encoder with row-level dropout."""

from __future__ import annotations

import numpy as np

from .graph import HeteroGraph, NormalizedAdjacency
from .streams import stream


def init_embeddings(node_count: int, dim: int, seed: int, branch: int = 0) -> np.ndarray:
    """Free embeddings drawn i.i.d. from N(0, (0.1/sqrt(dim))^2).

    ``branch`` selects an independent stream so two branches sharing a seed
    do not start from the same matrix.
    """
    if node_count < 1 or dim < 1:
        raise ValueError("node_count and dim must be >= 1")
    rng = stream(seed, "init", branch)
    return rng.normal(0.0, 0.1 / np.sqrt(dim), size=(node_count, dim))


def encode(adjacency: NormalizedAdjacency, W: np.ndarray, layers: int = 1) -> np.ndarray:
    """``tanh(Â W)``, repeated ``layers`` times (default 1)."""
    if W.ndim != 2 or W.shape[0] != adjacency.shape[0]:
        raise ValueError(f"embedding shape {W.shape} does not match adjacency {adjacency.shape}")
    F = W
    for _ in range(layers):
        F = np.tanh(adjacency.matrix @ F)
    return F


def propagate_message(ej: np.ndarray, neighbor_count: int) -> np.ndarray:
    """Message from node j to node i: ``e'_j / |N_i|``."""
    if neighbor_count < 1:
        raise ValueError("neighbor_count must be >= 1")
    return np.asarray(ej, dtype=np.float64) / neighbor_count


def encode_node(neighbors: set[int], node: int, W: np.ndarray) -> np.ndarray:
    """Per-node update: tanh of the summed messages from ``neighbors ∪ {node}``."""
    group = sorted(set(neighbors) | {node})
    o = np.zeros(W.shape[1])
    for j in group:
        o = o + propagate_message(W[j], len(group))
    return np.tanh(o)


def encode_per_node(graph: HeteroGraph, W: np.ndarray) -> np.ndarray:
    """Reference encoder working node by node from the edge list."""
    nbrs = graph.neighbors()
    return np.stack([encode_node(nbrs[v], v, W) for v in range(graph.node_count)])


def dropout_scale(n_rows: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Per-row multiplier: 0 with probability p, else 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return np.ones(n_rows)
    keep = rng.random(n_rows) >= p
    return keep / (1.0 - p)


def apply_feature_dropout(F: np.ndarray, p: float, rng_seed: int, training: bool = True) -> np.ndarray:
    """Zero whole node rows with probability p (inverted scaling); identity at inference."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return F
    scale = dropout_scale(F.shape[0], p, stream(rng_seed, "dropout"))
    return F * scale[:, None]
