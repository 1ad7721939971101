"""Interaction/catalog ingestion, chronological splitting, price quantization
and category willingness-to-pay (CWTP) analysis."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INTERACTIONS_HEADER = ("user_id", "item_id", "timestamp")
CATALOG_HEADER = ("item_id", "category_id", "price")
BUNDLE_VERSION = 1
QUANTIZERS = ("uniform", "rank")


class DatasetError(ValueError):
    """Raised for malformed input files or inconsistent records."""


@dataclass(frozen=True)
class RawInteraction:
    user_id: str
    item_id: str
    timestamp: int

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise DatasetError("user_id and item_id must be non-empty")
        if self.timestamp < 0:
            raise DatasetError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class CatalogEntry:
    item_id: str
    category_id: str
    price: float

    def __post_init__(self):
        if not self.item_id or not self.category_id:
            raise DatasetError("item_id and category_id must be non-empty")
        if not (self.price >= 0 and math.isfinite(self.price)):
            raise DatasetError(f"invalid price {self.price!r} for item {self.item_id!r}")


def _pairs(rows: Iterable[Sequence[int]] | np.ndarray) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.int64)
    return arr.reshape(-1, 2)


@dataclass
class Dataset:
    """Indexed, split interactions plus the item catalog.

    Users, items and categories are referred to by contiguous integer indices;
    ``user_ids[u]`` maps an index back to its external key. Splits are int64
    arrays of shape ``(n, 2)`` holding ``(user_idx, item_idx)`` rows.
    """

    user_ids: list[str]
    item_ids: list[str]
    category_ids: list[str]
    price_level_count: int
    item_price_level: np.ndarray
    item_category: np.ndarray
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    item_price: np.ndarray | None = None
    _positives: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.item_price_level = np.asarray(self.item_price_level, dtype=np.int64)
        self.item_category = np.asarray(self.item_category, dtype=np.int64)
        self.train = _pairs(self.train)
        self.validation = _pairs(self.validation)
        self.test = _pairs(self.test)
        if self.price_level_count < 2:
            raise DatasetError("price_level_count must be >= 2")
        n = len(self.item_ids)
        if self.item_price_level.shape != (n,) or self.item_category.shape != (n,):
            raise DatasetError("item attribute arrays must have one entry per item")
        if n and (self.item_price_level.min() < 0 or self.item_price_level.max() >= self.price_level_count):
            raise DatasetError("price level out of range")
        if n and (self.item_category.min() < 0 or self.item_category.max() >= len(self.category_ids)):
            raise DatasetError("category index out of range")
        for name in ("train", "validation", "test"):
            split = getattr(self, name)
            if len(split) and (
                split[:, 0].min() < 0
                or split[:, 0].max() >= self.num_users
                or split[:, 1].min() < 0
                or split[:, 1].max() >= self.num_items
            ):
                raise DatasetError(f"{name} split references an unknown index")

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def num_categories(self) -> int:
        return len(self.category_ids)

    def positives(self, *splits: str) -> list[set[int]]:
        """Per-user item sets over the union of the named splits."""
        key = tuple(sorted(splits))
        if key not in self._positives:
            sets: list[set[int]] = [set() for _ in range(self.num_users)]
            for name in key:
                for u, i in getattr(self, name).tolist():
                    sets[u].add(i)
            self._positives[key] = sets
        return self._positives[key]

    def equals(self, other: "Dataset") -> bool:
        return (
            self.user_ids == other.user_ids
            and self.item_ids == other.item_ids
            and self.category_ids == other.category_ids
            and self.price_level_count == other.price_level_count
            and np.array_equal(self.item_price_level, other.item_price_level)
            and np.array_equal(self.item_category, other.item_category)
            and all(np.array_equal(getattr(self, s), getattr(other, s)) for s in ("train", "validation", "test"))
        )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read_rows(path: Path, header: tuple[str, ...]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if tuple(c.strip() for c in first) != header:
            raise DatasetError(f"{path}:1: expected header {','.join(header)!r}, got {','.join(first)!r}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def load_dataset(interactions_path, catalog_path) -> tuple[list[RawInteraction], list[CatalogEntry]]:
    """Parse ``interactions.csv`` and ``catalog.csv``; row order is preserved.

    Raises:
        DatasetError: on a malformed row (message carries ``path:line``), a
            duplicate catalog item, or an interaction whose item is not in the
            catalog.
        FileNotFoundError: if either path does not exist.
    """
    interactions_path, catalog_path = Path(interactions_path), Path(catalog_path)
    for p in (interactions_path, catalog_path):
        if not p.is_file():
            raise FileNotFoundError(f"no such file: {p}")

    catalog: list[CatalogEntry] = []
    seen: set[str] = set()
    for line, (item_id, category_id, price) in _read_rows(catalog_path, CATALOG_HEADER):
        try:
            entry = CatalogEntry(item_id, category_id, float(price))
        except ValueError as exc:
            raise DatasetError(f"{catalog_path}:{line}: {exc}") from None
        if item_id in seen:
            raise DatasetError(f"{catalog_path}:{line}: duplicate item_id {item_id!r}")
        seen.add(item_id)
        catalog.append(entry)

    interactions: list[RawInteraction] = []
    for line, (user_id, item_id, ts) in _read_rows(interactions_path, INTERACTIONS_HEADER):
        try:
            rec = RawInteraction(user_id, item_id, int(ts))
        except ValueError as exc:
            raise DatasetError(f"{interactions_path}:{line}: {exc}") from None
        if item_id not in seen:
            raise DatasetError(f"{interactions_path}:{line}: item {item_id!r} is not in the catalog")
        interactions.append(rec)
    return interactions, catalog


def write_raw(interactions: Iterable[RawInteraction], catalog: Iterable[CatalogEntry], out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ipath, cpath = out / "interactions.csv", out / "catalog.csv"
    with open(ipath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERACTIONS_HEADER)
        for r in interactions:
            w.writerow((r.user_id, r.item_id, r.timestamp))
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CATALOG_HEADER)
        for c in catalog:
            w.writerow((c.item_id, c.category_id, repr(float(c.price))))
    return ipath, cpath


# ---------------------------------------------------------------------------
# Splitting and quantization
# ---------------------------------------------------------------------------


def split_sizes(n: int, ratios: Sequence[float] = (0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    # Exact decimal arithmetic so that e.g. 0.6 * 5 floors to 3, not 2.
    fr = [Fraction(repr(float(r))) for r in ratios]
    if len(fr) != 3 or any(r < 0 for r in fr) or sum(fr) != 1:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    n_train = math.floor(fr[0] * n)
    n_val = math.floor(fr[1] * n)
    return n_train, n_val, n - n_train - n_val


def chronological_split(
    interactions: Sequence[RawInteraction], ratios: Sequence[float] = (0.6, 0.2, 0.2)
) -> tuple[list[RawInteraction], list[RawInteraction], list[RawInteraction]]:
    """Sort by timestamp (stable, so ties keep input order) and cut into
    train/validation/test of sizes floor(r0*n), floor(r1*n) and the rest."""
    n_train, n_val, _ = split_sizes(len(interactions), ratios)
    ordered = sorted(interactions, key=lambda r: r.timestamp)
    return ordered[:n_train], ordered[n_train : n_train + n_val], ordered[n_train + n_val :]


def quantize_uniform(price: float, cat_min: float, cat_max: float, levels: int) -> int:
    """Uniform price level ``floor((price - min) / (max - min) * levels)``.

    The top of the range is clamped to ``levels - 1`` and a degenerate range
    (``min == max``) maps to level 0.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if not cat_min <= price <= cat_max:
        raise ValueError(f"price {price} outside category range [{cat_min}, {cat_max}]")
    if cat_max == cat_min:
        return 0
    level = math.floor((price - cat_min) / (cat_max - cat_min) * levels)
    return min(level, levels - 1)


def quantize_rank(category_prices: Sequence[tuple[int, float]], levels: int) -> dict[int, int]:
    """Rank-based levels: the item at 0-based rank r of n gets floor(levels*r/n).

    Ranks come from sorting by (price, item), so equal prices may still land
    on different levels.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    n = len(category_prices)
    ordered = sorted(category_prices, key=lambda t: (t[1], t[0]))
    return {item: min(levels * r // n, levels - 1) for r, (item, _) in enumerate(ordered)}


def quantize_catalog(prices: np.ndarray, categories: np.ndarray, levels: int, mode: str = "uniform") -> np.ndarray:
    """Price levels for a whole catalog, quantized within each category."""
    if mode not in QUANTIZERS:
        raise ValueError(f"unknown quantizer {mode!r}; expected one of {QUANTIZERS}")
    prices = np.asarray(prices, dtype=np.float64)
    categories = np.asarray(categories)
    out = np.zeros(len(prices), dtype=np.int64)
    for c in np.unique(categories):
        members = np.flatnonzero(categories == c)
        if mode == "uniform":
            lo, hi = prices[members].min(), prices[members].max()
            for i in members:
                out[i] = quantize_uniform(prices[i], lo, hi, levels)
        else:
            for i, lvl in quantize_rank([(int(i), prices[i]) for i in members], levels).items():
                out[i] = lvl
    return out


def build_dataset(
    interactions: Sequence[RawInteraction],
    catalog: Sequence[CatalogEntry],
    levels: int = 10,
    quantizer: str = "uniform",
    ratios: Sequence[float] = (0.6, 0.2, 0.2),
) -> Dataset:
    """Index raw records and produce a split, quantized :class:`Dataset`.

    Items are indexed in catalog order, categories in sorted key order and
    users in order of first appearance in ``interactions``.
    """
    item_index = {c.item_id: k for k, c in enumerate(catalog)}
    category_ids = sorted({c.category_id for c in catalog})
    category_index = {c: k for k, c in enumerate(category_ids)}
    user_index: dict[str, int] = {}
    for r in interactions:
        if r.item_id not in item_index:
            raise DatasetError(f"item {r.item_id!r} is not in the catalog")
        user_index.setdefault(r.user_id, len(user_index))

    prices = np.array([c.price for c in catalog], dtype=np.float64)
    item_category = np.array([category_index[c.category_id] for c in catalog], dtype=np.int64)
    item_level = quantize_catalog(prices, item_category, levels, quantizer)

    def index(rows):
        return [(user_index[r.user_id], item_index[r.item_id]) for r in rows]

    train, val, test = chronological_split(interactions, ratios)
    return Dataset(
        user_ids=list(user_index),
        item_ids=[c.item_id for c in catalog],
        category_ids=category_ids,
        price_level_count=levels,
        item_price_level=item_level,
        item_category=item_category,
        train=index(train),
        validation=index(val),
        test=index(test),
        item_price=prices,
    )


# ---------------------------------------------------------------------------
# CWTP analysis
# ---------------------------------------------------------------------------


@dataclass
class CwtpProfile:
    """Per-user CWTP maps (category index -> max price level) and entropies."""

    cwtp: dict[int, dict[int, int]]
    entropy: dict[int, float]

    def num_categories(self, user: int) -> int:
        return len(self.cwtp[user])


def compute_cwtp(dataset: Dataset, user: int) -> dict[int, int]:
    """Highest price level the user paid in each category, from training data."""
    rows = dataset.train[dataset.train[:, 0] == user, 1]
    if len(rows) == 0:
        raise ValueError(f"user {user} has no training interactions")
    out: dict[int, int] = {}
    for i in rows.tolist():
        c, lvl = int(dataset.item_category[i]), int(dataset.item_price_level[i])
        out[c] = max(out.get(c, lvl), lvl)
    return out


def cwtp_entropy(cwtp: dict) -> float:
    """Shannon entropy (nats) of the CWTP values across a user's categories."""
    if not cwtp:
        raise ValueError("empty CWTP map")
    n = len(cwtp)
    counts = Counter(cwtp.values())
    if len(counts) == 1:
        return 0.0
    return float(-sum((k / n) * math.log(k / n) for k in counts.values()))


def cwtp_profile(dataset: Dataset) -> CwtpProfile:
    """CWTP maps and entropies for every user with training interactions."""
    by_user: dict[int, dict[int, int]] = {}
    for u, i in dataset.train.tolist():
        c, lvl = int(dataset.item_category[i]), int(dataset.item_price_level[i])
        m = by_user.setdefault(u, {})
        m[c] = max(m.get(c, lvl), lvl)
    users = sorted(by_user)
    return CwtpProfile(
        cwtp={u: by_user[u] for u in users},
        entropy={u: cwtp_entropy(by_user[u]) for u in users},
    )


def write_cwtp_report(dataset: Dataset, profile: CwtpProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, h in profile.entropy.items():
            rec = {"user": dataset.user_ids[u], "entropy": h, "num_categories": len(profile.cwtp[u])}
            fh.write(json.dumps(rec) + "\n")


def entropy_histogram(values: Sequence[float], bins: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Histogram (edges, counts). A set of identical values yields one bin."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return np.array([]), np.array([], dtype=np.int64)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return np.array([lo, hi]), np.array([len(values)], dtype=np.int64)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return edges, counts.astype(np.int64)


# ---------------------------------------------------------------------------
# Prepared bundle
# ---------------------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def save_bundle(dataset: Dataset, out_dir, meta: dict | None = None) -> Path:
    """Write the indexed dataset as a directory of CSV files plus ``meta.json``.

    Output is a pure function of the dataset, so rewriting is byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    info = {
        "version": BUNDLE_VERSION,
        "price_level_count": dataset.price_level_count,
        "num_users": dataset.num_users,
        "num_items": dataset.num_items,
        "num_categories": dataset.num_categories,
        "split_sizes": [len(dataset.train), len(dataset.validation), len(dataset.test)],
    }
    info.update(meta or {})
    (out / "meta.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_csv(out / "users.csv", ("user_idx", "user_id"), enumerate(dataset.user_ids))
    _write_csv(out / "categories.csv", ("category_idx", "category_id"), enumerate(dataset.category_ids))
    prices = dataset.item_price if dataset.item_price is not None else np.full(dataset.num_items, np.nan)
    _write_csv(
        out / "items.csv",
        ("item_idx", "item_id", "category_idx", "price_level", "price"),
        (
            (k, iid, int(dataset.item_category[k]), int(dataset.item_price_level[k]), repr(float(prices[k])))
            for k, iid in enumerate(dataset.item_ids)
        ),
    )
    for name in ("train", "validation", "test"):
        _write_csv(out / f"{name}.csv", ("user_idx", "item_idx"), getattr(dataset, name).tolist())
    return out


def _read_table(path: Path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]


def load_bundle(path) -> Dataset:
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"no prepared dataset at {root} (missing meta.json)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    items = _read_table(root / "items.csv")
    return Dataset(
        user_ids=[r[1] for r in _read_table(root / "users.csv")],
        item_ids=[r[1] for r in items],
        category_ids=[r[1] for r in _read_table(root / "categories.csv")],
        price_level_count=int(meta["price_level_count"]),
        item_category=[int(r[2]) for r in items],
        item_price_level=[int(r[3]) for r in items],
        item_price=np.array([float(r[4]) for r in items]),
        train=[[int(a), int(b)] for a, b in _read_table(root / "train.csv")],
        validation=[[int(a), int(b)] for a, b in _read_table(root / "validation.csv")],
        test=[[int(a), int(b)] for a, b in _read_table(root / "test.csv")],
    )
