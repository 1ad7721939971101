"""Synthetic purchase logs with planted per-category price bands.

Each user prefers a few categories and, inside each, buys from a narrow band
of price levels. Some users keep the same band in every category
(consistent), the rest draw an independent band per category. A small share
of purchases is uniform noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CatalogEntry, Dataset, RawInteraction, build_dataset, quantize_catalog
from .streams import stream


@dataclass
class SyntheticWorld:
    interactions: list[RawInteraction]
    catalog: list[CatalogEntry]
    item_level: np.ndarray
    item_category: np.ndarray
    # user -> {category: (first level, last level)} inclusive
    bands: dict[int, dict[int, tuple[int, int]]]
    levels: int

    def in_band(self, user: int, item: int) -> bool:
        band = self.bands[user].get(int(self.item_category[item]))
        return band is not None and band[0] <= self.item_level[item] <= band[1]

    def in_band_fraction(self) -> float:
        if not self.interactions:
            return 1.0
        hits = sum(self.in_band(int(r.user_id[1:]), int(r.item_id[1:])) for r in self.interactions)
        return hits / len(self.interactions)


def generate_world(
    users: int,
    items: int,
    categories: int,
    levels: int,
    seed: int,
    band_width: int = 2,
    purchases: tuple[int, int] = (10, 20),
    max_preferred: int = 3,
    consistent_share: float = 0.5,
    noise: float = 0.05,
) -> SyntheticWorld:
    if min(users, items, categories, levels) < 1:
        raise ValueError("all counts must be >= 1")
    levels = max(levels, 2)
    band_width = max(1, min(band_width, levels))
    rng = stream(seed, "synthetic")

    item_category = rng.integers(categories, size=items)
    lo = rng.uniform(5.0, 50.0, size=categories)
    hi = lo * rng.uniform(5.0, 20.0, size=categories)
    prices = np.round(lo[item_category] + rng.random(items) * (hi - lo)[item_category], 2)
    item_level = quantize_catalog(prices, item_category, levels, "uniform")
    catalog = [CatalogEntry(f"i{k}", f"c{item_category[k]}", float(prices[k])) for k in range(items)]

    cells: dict[tuple[int, int], np.ndarray] = {}
    for c in range(categories):
        for lvl in range(levels):
            cells[(c, lvl)] = np.flatnonzero((item_category == c) & (item_level == lvl))

    bands: dict[int, dict[int, tuple[int, int]]] = {}
    interactions: list[RawInteraction] = []
    for u in range(users):
        n_pref = int(rng.integers(1, min(max_preferred, categories) + 1))
        prefs = rng.choice(categories, size=n_pref, replace=False)
        shared = int(rng.integers(levels - band_width + 1))
        consistent = rng.random() < consistent_share
        bands[u] = {}
        for c in prefs.tolist():
            start = shared if consistent else int(rng.integers(levels - band_width + 1))
            bands[u][c] = (start, start + band_width - 1)
        pool = np.unique(
            np.concatenate([cells[(c, l)] for c, (a, b) in bands[u].items() for l in range(a, b + 1)] + [np.empty(0, int)])
        )
        n = int(rng.integers(purchases[0], purchases[1] + 1))
        chosen: list[int] = []
        taken: set[int] = set()
        for _ in range(n):
            if rng.random() < noise or len(taken & set(pool.tolist())) >= len(pool):
                i = int(rng.integers(items))
            else:
                i = int(rng.choice(pool))
            if i in taken:
                continue
            taken.add(i)
            chosen.append(i)
        for i in chosen:
            interactions.append(RawInteraction(f"u{u}", f"i{i}", int(rng.integers(1_000_000))))
    return SyntheticWorld(interactions, catalog, item_level, item_category, bands, levels)


def generate_synthetic_dataset(users: int, items: int, categories: int, levels: int, seed: int, **kwargs) -> Dataset:
    """Planted-band dataset, split chronologically 60/20/20."""
    world = generate_world(users, items, categories, levels, seed, **kwargs)
    return build_dataset(world.interactions, world.catalog, levels=max(levels, 2), quantizer="uniform")
