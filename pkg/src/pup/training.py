"""BPR training with hand-written gradients and Adam.

A model is a list of *branches*. Each branch owns one embedding matrix over
the full node index space and scores a (user, item) pair as the pairwise
interaction sum over the user node and a fixed tuple of item-side nodes
(the item itself, its category node, its price node). A branch either runs
the graph encoder ``tanh(Â W)`` or reads ``W`` directly (lookup), which is
how the matrix-factorization and FM baselines share this code.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import Dataset
from .decoder import pairwise_sum
from .encoder import dropout_scale, init_embeddings
from .graph import NodeLayout, NormalizedAdjacency, build_graph, build_normalized_adjacency
from .streams import stream

log = logging.getLogger(__name__)

ITEM_FEATURES = ("item", "category", "price")
CHECKPOINT_MAGIC = b"PUPCKPT1"


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, what: str = "loss"):
        super().__init__(f"non-finite {what} at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    total_dim: int = 64
    dim_split: tuple[int, int] = (48, 16)
    learning_rate: float = 1e-2
    batch_size: int = 1024
    epochs: int = 200
    neg_rate: int = 1
    lambda_reg: float = 1e-4
    alpha: float = 1.0
    dropout_p: float = 0.1
    seed: int = 0
    lr_decay_epochs: tuple[int, int] | None = None
    layers: int = 1

    def __post_init__(self):
        self.dim_split = tuple(int(x) for x in self.dim_split)
        if self.lr_decay_epochs is not None:
            self.lr_decay_epochs = tuple(int(x) for x in self.lr_decay_epochs)
        if len(self.dim_split) != 2 or sum(self.dim_split) != self.total_dim or min(self.dim_split) < 1:
            raise ValueError(f"dim_split {self.dim_split} must be two positive sizes summing to {self.total_dim}")
        if self.batch_size < 1 or self.neg_rate < 1 or self.epochs < 0 or self.layers < 1:
            raise ValueError("batch_size, neg_rate, layers must be >= 1 and epochs >= 0")
        if self.learning_rate < 0 or self.lambda_reg < 0:
            raise ValueError("learning_rate and lambda_reg must be non-negative")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")

    def decay_epochs(self) -> tuple[int, int]:
        if self.lr_decay_epochs is not None:
            return self.lr_decay_epochs
        return (self.epochs // 2, (3 * self.epochs) // 4)

    def learning_rate_at(self, epoch: int) -> float:
        drops = sum(epoch >= e for e in self.decay_epochs())
        return self.learning_rate * 0.1**drops

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dim_split"] = list(self.dim_split)
        d["lr_decay_epochs"] = list(self.lr_decay_epochs) if self.lr_decay_epochs else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass
class Branch:
    name: str
    item_features: tuple[str, ...]
    weight: float
    W: np.ndarray
    graph: bool = True


@dataclass
class PairwiseModel:
    variant: str
    layout: NodeLayout
    item_category: np.ndarray
    item_price_level: np.ndarray
    branches: list[Branch]
    adjacency: NormalizedAdjacency | None = None
    layers: int = 1

    @property
    def params(self) -> list[np.ndarray]:
        return [b.W for b in self.branches]

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        for b, W in zip(self.branches, params):
            b.W = W

    def feature_nodes(self, features: Sequence[str], items: np.ndarray) -> np.ndarray:
        """Node indices of the item-side features, shape ``(len(features), len(items))``."""
        lay = self.layout
        rows = []
        for f in features:
            if f == "item":
                rows.append(items + lay.item_offset)
            elif f == "category":
                rows.append(self.item_category[items] + lay.category_offset)
            elif f == "price":
                rows.append(self.item_price_level[items] + lay.price_offset)
            else:
                raise ValueError(f"unknown item feature {f!r}")
        return np.stack(rows).astype(np.int64)

    def represent(self, branch: Branch, W: np.ndarray | None = None) -> np.ndarray:
        W = branch.W if W is None else W
        if not branch.graph:
            return W
        F = W
        for _ in range(self.layers):
            F = np.tanh(self.adjacency.matrix @ F)
        return F

    def representations(self) -> list[np.ndarray]:
        return [self.represent(b) for b in self.branches]

    def scores(self, users: Sequence[int]) -> np.ndarray:
        """Score matrix of shape ``(len(users), num_items)`` at inference."""
        users = np.asarray(users, dtype=np.int64)
        items = np.arange(self.layout.num_items)
        out = np.zeros((len(users), len(items)))
        for b in self.branches:
            F = self.represent(b)
            V = F[self.feature_nodes(b.item_features, items)]  # (k, N, d)
            item_pairs = pairwise_sum(V) if len(b.item_features) > 1 else 0.0
            out += b.weight * (F[users] @ V.sum(axis=0).T + item_pairs)
        return out

    def score_pairs(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        out = np.zeros(len(users))
        for b in self.branches:
            F = self.represent(b)
            out += b.weight * _branch_scores(F, users, self.feature_nodes(b.item_features, items))
        return out


def _branch_scores(F: np.ndarray, users: np.ndarray, item_nodes: np.ndarray) -> np.ndarray:
    nodes = np.vstack([users[None, :], item_nodes])
    return pairwise_sum(F[nodes])


PUP_VARIANTS = {
    # name: (category nodes, price nodes, branches as (name, item features, weight key, dim key))
    "pup": (True, True, [("global", ("item", "price"), "one", "global"), ("category", ("category", "price"), "alpha", "category")]),
    "pup-minus-category": (False, True, [("global", ("item", "price"), "one", "total")]),
    "pup-minus-price": (True, False, [("global", ("item",), "one", "global"), ("category", ("category",), "alpha", "category")]),
    "pup-minus-both": (False, False, [("global", ("item",), "one", "total")]),
}


def build_pup_model(dataset: Dataset, config: TrainConfig, variant: str = "pup") -> PairwiseModel:
    """Freshly initialized PUP model (or one of its ablations)."""
    if variant not in PUP_VARIANTS:
        raise ValueError(f"unknown PUP variant {variant!r}")
    with_cat, with_price, specs = PUP_VARIANTS[variant]
    graph = build_graph(dataset, include_category_nodes=with_cat, include_price_nodes=with_price)
    adjacency = build_normalized_adjacency(graph)
    dims = {"global": config.dim_split[0], "category": config.dim_split[1], "total": config.total_dim}
    weights = {"one": 1.0, "alpha": config.alpha}
    branches = [
        Branch(name, feats, weights[wk], init_embeddings(graph.node_count, dims[dk], config.seed, k))
        for k, (name, feats, wk, dk) in enumerate(specs)
    ]
    return PairwiseModel(
        variant,
        graph.layout,
        dataset.item_category.copy(),
        dataset.item_price_level.copy(),
        branches,
        adjacency,
        config.layers,
    )


def build_lookup_model(dataset: Dataset, config: TrainConfig, variant: str, item_features: tuple[str, ...]) -> PairwiseModel:
    layout = NodeLayout.from_dataset(dataset)
    W = init_embeddings(layout.node_count, config.total_dim, config.seed, 0)
    return PairwiseModel(
        variant,
        layout,
        dataset.item_category.copy(),
        dataset.item_price_level.copy(),
        [Branch(variant, item_features, 1.0, W, graph=False)],
    )


# ---------------------------------------------------------------------------
# Loss, sampling, gradients, optimizer
# ---------------------------------------------------------------------------


def bpr_loss(s_ui, s_uj):
    """``-ln sigmoid(s_ui - s_uj)``, evaluated without overflow."""
    return np.logaddexp(0.0, -(np.asarray(s_ui, dtype=np.float64) - s_uj))


def sample_negative(user: int, train_positives: Sequence[set[int]], item_count: int, rng: np.random.Generator) -> int:
    """Uniform item the user has not interacted with (rejection sampling)."""
    pos = train_positives[user]
    if len(pos) >= item_count:
        raise ValueError(f"user {user} interacted with every item; no negative exists")
    while True:
        j = int(rng.integers(item_count))
        if j not in pos:
            return j


def sample_triplets(
    train: np.ndarray, item_count: int, neg_rate: int, rng: np.random.Generator
) -> np.ndarray:
    """``(u, i, j)`` rows, ``neg_rate`` uniform negatives per training pair."""
    codes = np.unique(train[:, 0] * item_count + train[:, 1])
    users, counts = np.unique(codes // item_count, return_counts=True)
    if np.any(counts >= item_count):
        raise ValueError(f"user {int(users[counts >= item_count][0])} interacted with every item; no negative exists")
    u = np.repeat(train[:, 0], neg_rate)
    i = np.repeat(train[:, 1], neg_rate)
    j = rng.integers(item_count, size=len(u))
    bad = np.isin(u * item_count + j, codes)
    while bad.any():
        j[bad] = rng.integers(item_count, size=int(bad.sum()))
        bad[bad] = np.isin(u[bad] * item_count + j[bad], codes)
    return np.column_stack([u, i, j]).astype(np.int64)


def compute_gradients(
    model: PairwiseModel,
    batch: np.ndarray,
    lambda_reg: float,
    row_scales: Sequence[np.ndarray | None] | None = None,
    params: Sequence[np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Mean batch BPR loss plus L2 penalty, and its exact gradient per branch.

    The penalty is ``lambda_reg / B`` times the summed squared norms of the
    free embedding rows each triplet's scores read (user, and the item-side
    nodes of both items, counted with multiplicity). ``row_scales`` are fixed
    per-branch dropout multipliers applied after the encoder; the same ones
    are used on the backward pass.
    """
    if model.layers != 1 and any(b.graph for b in model.branches):
        raise NotImplementedError("analytic gradients are implemented for one encoder layer")
    params = model.params if params is None else params
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    B = len(batch)
    u, i, j = batch.T
    row_scales = row_scales or [None] * len(model.branches)

    cache = []
    s_pos = np.zeros(B)
    s_neg = np.zeros(B)
    for b, W, scale in zip(model.branches, params, row_scales):
        F = model.represent(b, W)
        Fd = F if scale is None else F * scale[:, None]
        n_pos = np.vstack([u[None, :], model.feature_nodes(b.item_features, i)])
        n_neg = np.vstack([u[None, :], model.feature_nodes(b.item_features, j)])
        V_pos, V_neg = Fd[n_pos], Fd[n_neg]
        s_pos += b.weight * pairwise_sum(V_pos)
        s_neg += b.weight * pairwise_sum(V_neg)
        cache.append((F, n_pos, n_neg, V_pos, V_neg))

    x = s_pos - s_neg
    loss = float(bpr_loss(s_pos, s_neg).mean())
    g_x = -expit(-x) / B  # d(mean loss)/dx

    grads = []
    for b, W, scale, (F, n_pos, n_neg, V_pos, V_neg) in zip(model.branches, params, row_scales, cache):
        n, d = W.shape
        G = np.zeros((n, d))
        coef = (b.weight * g_x)[None, :, None]
        np.add.at(G, n_pos.ravel(), (coef * (V_pos.sum(axis=0)[None] - V_pos)).reshape(-1, d))
        np.add.at(G, n_neg.ravel(), (-coef * (V_neg.sum(axis=0)[None] - V_neg)).reshape(-1, d))
        if scale is not None:
            G *= scale[:, None]
        if b.graph:
            G = model.adjacency.matrix.T @ (G * (1.0 - F * F))
        if lambda_reg:
            rows = np.concatenate([n_pos.ravel(), n_neg[1:].ravel()])
            counts = np.bincount(rows, minlength=n).astype(np.float64)
            loss += float(lambda_reg / B * (counts * (W * W).sum(axis=1)).sum())
            G = G + (2.0 * lambda_reg / B) * counts[:, None] * W
        grads.append(G)
    return loss, grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, lr: float
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, b1, b2, state.eps)


# ---------------------------------------------------------------------------
# Loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: PairwiseModel
    history: list[tuple[int, float, float]] = field(default_factory=list)  # (epoch, mean_loss, lr)


def fit_model(model: PairwiseModel, dataset: Dataset, config: TrainConfig) -> TrainResult:
    """Train ``model`` in place with shuffled mini-batches of BPR triplets.

    Negatives are redrawn every epoch; both branches are re-encoded for every
    batch. Dropout is applied to graph branches only, with independent masks.
    """
    if len(dataset.train) == 0:
        raise ValueError("training split is empty")
    sampler = stream(config.seed, "sampling")
    dropper = stream(config.seed, "dropout")
    state = AdamState.zeros_like(model.params)
    history: list[tuple[int, float, float]] = []
    n_nodes = model.layout.node_count

    for epoch in range(config.epochs):
        lr = config.learning_rate_at(epoch)
        triplets = sample_triplets(dataset.train, dataset.num_items, config.neg_rate, sampler)
        triplets = triplets[sampler.permutation(len(triplets))]
        total = 0.0
        for start in range(0, len(triplets), config.batch_size):
            batch = triplets[start : start + config.batch_size]
            scales = [
                dropout_scale(n_nodes, config.dropout_p, dropper) if (b.graph and config.dropout_p > 0) else None
                for b in model.branches
            ]
            loss, grads = compute_gradients(model, batch, config.lambda_reg, scales)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch)
            if not all(np.isfinite(g).all() for g in grads):
                raise TrainingDiverged(epoch, "gradient")
            params, state = adam_step(model.params, grads, state, lr)
            model.set_params(params)
            total += loss * len(batch)
        mean = total / len(triplets)
        history.append((epoch, mean, lr))
        log.debug("epoch %d loss %.6f lr %g", epoch, mean, lr)
    return TrainResult(model, history)


def train(dataset: Dataset, config: TrainConfig, variant: str = "pup") -> TrainResult:
    """Build and train a PUP model (or ablation)."""
    return fit_model(build_pup_model(dataset, config, variant), dataset, config)


def write_loss_history(history, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss,learning_rate\n")
        for epoch, loss, lr in history:
            fh.write(f"{epoch},{loss!r},{lr!r}\n")


# ---------------------------------------------------------------------------
# Checkpoints: magic line, JSON header line, then raw little-endian float64
# arrays in header order.
# ---------------------------------------------------------------------------


def write_checkpoint(path, variant: str, arrays: dict[str, np.ndarray], config: dict, seed: int, extra: dict | None = None) -> None:
    header = {
        "variant": variant,
        "seed": seed,
        "config": config,
        "arrays": [{"name": k, "shape": list(a.shape)} for k, a in arrays.items()],
    }
    header.update(extra or {})
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no checkpoint at {path}")
    with open(path, "rb") as fh:
        if fh.readline().rstrip(b"\n") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint (bad magic)")
        header = json.loads(fh.readline().decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"{path}: truncated array {spec['name']!r}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    return header, arrays


def save_model(path, model: PairwiseModel, config: TrainConfig) -> None:
    arrays = {f"W_{b.name}": b.W for b in model.branches}
    write_checkpoint(path, model.variant, arrays, config.to_dict(), config.seed)
