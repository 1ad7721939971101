"""Top-K evaluation: Recall/NDCG, cold-start candidate pools and
CWTP-entropy user groups."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .dataset import Dataset, cwtp_profile

log = logging.getLogger(__name__)

PROTOCOLS = ("standard", "cir", "ucir")
DEFAULT_KS = (50, 100)


class Scorer(Protocol):
    def scores(self, users: Sequence[int]) -> np.ndarray: ...


@dataclass(frozen=True)
class RankedList:
    items: tuple[int, ...]
    user: int
    pool: str = "standard"

    def __len__(self) -> int:
        return len(self.items)


def rank_topk(scores: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    """Top-k candidates by score; equal scores go to the smaller item index."""
    candidates = np.asarray(candidates, dtype=np.int64)
    order = np.lexsort((candidates, -scores[candidates]))
    return candidates[order[:k]]


def recommend_topk(
    model: Scorer,
    user: int,
    candidates: Iterable[int],
    k: int,
    exclude: Iterable[int] = (),
    pool: str = "standard",
) -> RankedList:
    """Rank ``candidates`` minus ``exclude`` for ``user`` and keep the top k."""
    eligible = np.array(sorted(set(candidates) - set(exclude)), dtype=np.int64)
    if len(eligible) == 0:
        raise ValueError(f"user {user} has no eligible candidates")
    row = model.scores([user])[0]
    return RankedList(tuple(int(i) for i in rank_topk(row, eligible, k)), user, pool)


def recall_at_k(ranked: RankedList | Sequence[int], relevant: set[int]) -> float:
    items = ranked.items if isinstance(ranked, RankedList) else ranked
    if not relevant:
        raise ValueError("relevant set is empty")
    return len(set(items) & set(relevant)) / len(relevant)


def ndcg_at_k(ranked: RankedList | Sequence[int], relevant: set[int], k: int) -> float:
    """Binary-relevance NDCG with the 1/log2(rank + 1) discount."""
    items = ranked.items if isinstance(ranked, RankedList) else ranked
    if not relevant:
        raise ValueError("relevant set is empty")
    dcg = sum(1.0 / math.log2(r + 2) for r, i in enumerate(items[:k]) if i in relevant)
    idcg = sum(1.0 / math.log2(r + 2) for r in range(min(len(relevant), k)))
    return dcg / idcg


# ---------------------------------------------------------------------------
# Cold-start pools
# ---------------------------------------------------------------------------


def _categories(dataset: Dataset, items: Iterable[int]) -> set[int]:
    return {int(dataset.item_category[i]) for i in items}


def unexplored_test_categories(user: int, dataset: Dataset) -> set[int]:
    train_cats = _categories(dataset, dataset.positives("train")[user])
    return _categories(dataset, dataset.positives("test")[user]) - train_cats


def build_cir_pool(user: int, dataset: Dataset) -> set[int]:
    """All items of the categories the user bought from in test but never in training."""
    cats = unexplored_test_categories(user, dataset)
    if not cats:
        raise ValueError(f"user {user} has no test positives in unexplored categories")
    return {int(i) for i in np.flatnonzero(np.isin(dataset.item_category, list(cats)))}


def build_ucir_pool(user: int, dataset: Dataset) -> set[int]:
    """All items whose category is absent from the user's training history."""
    if not unexplored_test_categories(user, dataset):
        raise ValueError(f"user {user} has no test positives in unexplored categories")
    train_cats = _categories(dataset, dataset.positives("train")[user])
    return {int(i) for i in np.flatnonzero(~np.isin(dataset.item_category, list(train_cats)))}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class UserMetrics:
    user: int
    recall: dict[int, float]
    ndcg: dict[int, float]


@dataclass
class MetricsReport:
    protocol: str
    ks: tuple[int, ...]
    recall: dict[int, float]
    ndcg: dict[int, float]
    users_evaluated: int
    per_user: list[UserMetrics] = field(default_factory=list)
    group: str | None = None

    @classmethod
    def from_users(cls, protocol: str, ks: Sequence[int], rows: list[UserMetrics], group: str | None = None):
        ks = tuple(ks)
        n = len(rows)

        def mean(values):
            return float(np.mean(values)) if n else 0.0

        return cls(
            protocol,
            ks,
            {k: mean([r.recall[k] for r in rows]) for k in ks},
            {k: mean([r.ndcg[k] for r in rows]) for k in ks},
            n,
            rows,
            group,
        )

    def lines(self) -> list[dict]:
        out = []
        for k in self.ks:
            rec = {
                "protocol": self.protocol,
                "K": k,
                "recall": self.recall[k],
                "ndcg": self.ndcg[k],
                "users_evaluated": self.users_evaluated,
            }
            if self.group is not None:
                rec["group"] = self.group
            out.append(rec)
        return out


def write_metrics(reports: Iterable[MetricsReport], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            for rec in rep.lines():
                fh.write(json.dumps(rec) + "\n")


def write_per_user(reports: Iterable[MetricsReport], dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("user_id", "K", "recall", "ndcg", "entropy_group"))
        for rep in reports:
            for row in rep.per_user:
                for k in rep.ks:
                    w.writerow((dataset.user_ids[row.user], k, repr(row.recall[k]), repr(row.ndcg[k]), rep.group or ""))


# ---------------------------------------------------------------------------
# Evaluation loop
# ---------------------------------------------------------------------------


def _tasks(dataset: Dataset, protocol: str, users: Iterable[int] | None):
    """(user, candidate array, relevant set) for every evaluable user, in user order."""
    seen = dataset.positives("train", "validation")
    test = dataset.positives("test")
    all_items = np.arange(dataset.num_items)
    pool_fn = {"cir": build_cir_pool, "ucir": build_ucir_pool}.get(protocol)
    candidates_users = range(dataset.num_users) if users is None else sorted(set(users))
    for u in candidates_users:
        if not test[u]:
            continue
        if pool_fn is None:
            pool = all_items
            relevant = test[u] - seen[u]
        else:
            unexplored = unexplored_test_categories(u, dataset)
            if not unexplored:
                continue
            pool = np.array(sorted(pool_fn(u, dataset)), dtype=np.int64)
            relevant = {i for i in test[u] - seen[u] if int(dataset.item_category[i]) in unexplored}
        if not relevant:
            continue
        mask = np.ones(len(pool), dtype=bool)
        if seen[u]:
            mask &= ~np.isin(pool, list(seen[u]))
        eligible = pool[mask]
        if len(eligible) == 0:
            log.warning("user %d skipped: empty candidate pool", u)
            continue
        yield u, eligible, relevant


def evaluate(
    model: Scorer,
    dataset: Dataset,
    ks: Sequence[int] = DEFAULT_KS,
    protocol: str = "standard",
    users: Iterable[int] | None = None,
    threads: int = 1,
    chunk: int = 256,
    group: str | None = None,
) -> MetricsReport:
    """Average Recall@K and NDCG@K over users with at least one test positive.

    Candidates are all items (``standard``) or the CIR/UCIR pool, minus the
    user's train and validation positives. Per-user results are reduced in
    user order regardless of ``threads``.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    ks = tuple(sorted(set(int(k) for k in ks)))
    kmax = max(ks)
    tasks = list(_tasks(dataset, protocol, users))
    chunks = [tasks[s : s + chunk] for s in range(0, len(tasks), chunk)]

    def run(part):
        score_rows = model.scores([t[0] for t in part])
        rows = []
        for (u, eligible, relevant), row in zip(part, score_rows):
            top = [int(i) for i in rank_topk(row, eligible, kmax)]
            rows.append(
                UserMetrics(
                    u,
                    {k: recall_at_k(top[:k], relevant) for k in ks},
                    {k: ndcg_at_k(top, relevant, k) for k in ks},
                )
            )
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    rows = [r for p in parts for r in p]
    return MetricsReport.from_users(protocol, ks, rows, group)


def entropy_groups(dataset: Dataset, threshold: float) -> tuple[list[int], list[int]]:
    """Users with CWTP entropy <= threshold (consistent) and > threshold."""
    prof = cwtp_profile(dataset)
    consistent = [u for u, h in prof.entropy.items() if h <= threshold]
    inconsistent = [u for u, h in prof.entropy.items() if h > threshold]
    return consistent, inconsistent


def evaluate_by_entropy_group(
    model: Scorer,
    dataset: Dataset,
    threshold: float,
    ks: Sequence[int] = DEFAULT_KS,
    protocol: str = "standard",
    threads: int = 1,
) -> tuple[MetricsReport, MetricsReport]:
    """Standard evaluation run separately on consistent and inconsistent users.

    Users without training interactions have no CWTP and belong to neither
    group. An empty group yields a report with ``users_evaluated == 0``.
    """
    consistent, inconsistent = entropy_groups(dataset, threshold)
    return (
        evaluate(model, dataset, ks, protocol, consistent, threads, group="consistent"),
        evaluate(model, dataset, ks, protocol, inconsistent, threads, group="inconsistent"),
    )
