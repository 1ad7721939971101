"""ItemPop, BPR-MF and FM baselines, and the registry of all model variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .training import (
    PUP_VARIANTS,
    PairwiseModel,
    TrainConfig,
    TrainResult,
    build_lookup_model,
    build_pup_model,
    fit_model,
    read_checkpoint,
    save_model,
    write_checkpoint,
)


@dataclass
class ItemPop:
    """Non-personalized ranker: score is the item's training interaction count."""

    counts: np.ndarray
    variant: str = "itempop"

    def score(self, u: int, i: int) -> float:
        return float(self.counts[i])

    def scores(self, users) -> np.ndarray:
        return np.tile(self.counts.astype(np.float64), (len(users), 1))


def itempop_fit(dataset: Dataset) -> ItemPop:
    return ItemPop(np.bincount(dataset.train[:, 1], minlength=dataset.num_items).astype(np.float64))


def itempop_score(model: ItemPop, u: int, i: int) -> float:
    return model.score(u, i)


def bprmf_fit(dataset: Dataset, config: TrainConfig) -> TrainResult:
    """Matrix factorization, score ``e_u . e_i``, trained by the shared BPR loop."""
    return fit_model(build_lookup_model(dataset, config, "bprmf", ("item",)), dataset, config)


def fm_fit(dataset: Dataset, config: TrainConfig) -> TrainResult:
    """2-way FM over one-hot (user, item, category, price level) features.

    No first-order terms: the score is the pairwise inner-product sum only.
    """
    return fit_model(build_lookup_model(dataset, config, "fm", ("item", "category", "price")), dataset, config)


LOOKUP_VARIANTS = {"bprmf": ("item",), "fm": ("item", "category", "price")}
VARIANTS = (*PUP_VARIANTS, "itempop", "bprmf", "fm")


def build_variant(variant: str, dataset: Dataset, config: TrainConfig):
    if variant in PUP_VARIANTS:
        return build_pup_model(dataset, config, variant)
    if variant in LOOKUP_VARIANTS:
        return build_lookup_model(dataset, config, variant, LOOKUP_VARIANTS[variant])
    if variant == "itempop":
        return itempop_fit(dataset)
    raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")


def fit_variant(variant: str, dataset: Dataset, config: TrainConfig) -> TrainResult:
    """Train any variant; ItemPop just counts and has an empty loss history."""
    model = build_variant(variant, dataset, config)
    if isinstance(model, ItemPop):
        return TrainResult(model, [])
    return fit_model(model, dataset, config)


def save_variant(path, model, config: TrainConfig) -> None:
    if isinstance(model, ItemPop):
        write_checkpoint(path, "itempop", {"counts": model.counts}, config.to_dict(), config.seed)
    else:
        save_model(path, model, config)


def load_variant(path, dataset: Dataset):
    """Rebuild a model from a checkpoint; the graph is reconstructed from ``dataset``."""
    header, arrays = read_checkpoint(path)
    variant = header["variant"]
    if variant == "itempop":
        counts = arrays["counts"]
        if counts.shape != (dataset.num_items,):
            raise ValueError("checkpoint does not match the dataset's item count")
        return ItemPop(counts), header
    config = TrainConfig.from_dict(header["config"])
    model: PairwiseModel = build_variant(variant, dataset, config)
    for b in model.branches:
        W = arrays[f"W_{b.name}"]
        if W.shape != b.W.shape:
            raise ValueError(f"checkpoint array W_{b.name} has shape {W.shape}, expected {b.W.shape}")
        b.W = W
    return model, header
