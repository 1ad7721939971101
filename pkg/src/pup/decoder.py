"""Pairwise-interaction (2-way FM style) decoder and the two-branch PUP score."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .graph import NodeLayout


@dataclass(frozen=True)
class BranchScore:
    s_global: float
    s_category: float
    s: float


def pairwise_sum(stack: np.ndarray) -> np.ndarray:
    """Sum of inner products over all unordered pairs along axis 0.

    ``stack`` has shape ``(k, ..., d)``; the result drops the first and last
    axes. Uses ``0.5 * (|sum v|^2 - sum |v|^2)``, linear in k.
    """
    total = stack.sum(axis=0)
    return 0.5 * ((total * total).sum(axis=-1) - (stack * stack).sum(axis=(0, -1)))


def score_branch(vectors: Sequence[np.ndarray]) -> float:
    """Pairwise interaction score of k >= 2 equal-length vectors."""
    if len(vectors) < 2:
        raise ValueError("need at least two vectors")
    arrs = [np.asarray(v, dtype=np.float64) for v in vectors]
    d = arrs[0].shape
    if any(a.ndim != 1 or a.shape != d for a in arrs):
        raise ValueError("vectors must be 1-D with equal dimension")
    return float(pairwise_sum(np.stack(arrs)))


def score_pup(
    u: int,
    i: int,
    global_enc: np.ndarray,
    category_enc: np.ndarray,
    dataset: Dataset,
    alpha: float = 1.0,
) -> BranchScore:
    """Two-branch score of user ``u`` on item ``i`` (dataset indices).

    The global branch pairs (user, item, price); the category branch pairs
    (user, category, price) and never reads the item representation.
    """
    layout = NodeLayout.from_dataset(dataset)
    if not (0 <= u < dataset.num_users and 0 <= i < dataset.num_items):
        raise IndexError(f"unknown user/item ({u}, {i})")
    item = layout.item_offset + i
    cat = layout.category_offset + int(dataset.item_category[i])
    price = layout.price_offset + int(dataset.item_price_level[i])
    s_g = score_branch([global_enc[u], global_enc[item], global_enc[price]])
    s_c = score_branch([category_enc[u], category_enc[cat], category_enc[price]])
    return BranchScore(s_g, s_c, s_g + alpha * s_c)
