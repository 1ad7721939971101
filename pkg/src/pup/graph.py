"""Unified user/item/category/price graph and its rectified adjacency."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset


@dataclass(frozen=True)
class NodeLayout:
    """Contiguous node index blocks: users, items, categories, price levels."""

    num_users: int
    num_items: int
    num_categories: int
    num_levels: int

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "NodeLayout":
        return cls(dataset.num_users, dataset.num_items, dataset.num_categories, dataset.price_level_count)

    @property
    def item_offset(self) -> int:
        return self.num_users

    @property
    def category_offset(self) -> int:
        return self.num_users + self.num_items

    @property
    def price_offset(self) -> int:
        return self.num_users + self.num_items + self.num_categories

    @property
    def node_count(self) -> int:
        return self.price_offset + self.num_levels

    def role(self, node: int) -> str:
        if not 0 <= node < self.node_count:
            raise IndexError(f"node {node} out of range")
        if node < self.item_offset:
            return "user"
        if node < self.category_offset:
            return "item"
        if node < self.price_offset:
            return "category"
        return "price"


@dataclass(frozen=True)
class HeteroGraph:
    layout: NodeLayout
    edges: np.ndarray  # (E, 2) int64, each undirected edge once with src < dst, sorted
    include_category_nodes: bool
    include_price_nodes: bool

    @property
    def node_count(self) -> int:
        return self.layout.node_count

    def neighbors(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in range(self.node_count)]
        for a, b in self.edges.tolist():
            out[a].add(b)
            out[b].add(a)
        return out

    def dump_edges(self, path) -> None:
        """Debug dump: one ``src\\tdst`` line per edge, both directions, sorted."""
        both = sorted(
            [(int(a), int(b)) for a, b in self.edges] + [(int(b), int(a)) for a, b in self.edges]
        )
        Path(path).write_text("".join(f"{a}\t{b}\n" for a, b in both), encoding="utf-8")


def build_graph(dataset: Dataset, include_category_nodes: bool = True, include_price_nodes: bool = True) -> HeteroGraph:
    """User-item edges from deduplicated training pairs, plus each item's
    category and price edges when enabled.

    Every category and price node is allocated regardless of the flags, so the
    index space is the same across ablations.
    """
    layout = NodeLayout.from_dataset(dataset)
    items = np.arange(dataset.num_items, dtype=np.int64)
    blocks = []
    if len(dataset.train):
        ui = np.unique(dataset.train, axis=0)
        blocks.append(np.column_stack([ui[:, 0], ui[:, 1] + layout.item_offset]))
    if include_category_nodes:
        blocks.append(np.column_stack([items + layout.item_offset, dataset.item_category + layout.category_offset]))
    if include_price_nodes:
        blocks.append(np.column_stack([items + layout.item_offset, dataset.item_price_level + layout.price_offset]))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=np.int64)
    edges = np.unique(np.sort(edges, axis=1), axis=0).astype(np.int64).reshape(-1, 2)
    return HeteroGraph(layout, edges, include_category_nodes, include_price_nodes)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Row-stochastic ``f(A + I)``: row v is uniform over v's neighbors and itself."""

    matrix: sp.csr_matrix
    degree: np.ndarray  # |N_v| including the self-loop

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def neighbor_lists(self) -> list[np.ndarray]:
        m = self.matrix
        return [m.indices[m.indptr[v] : m.indptr[v + 1]] for v in range(m.shape[0])]


def raw_adjacency(graph: HeteroGraph) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency without self-loops."""
    n = graph.node_count
    e = graph.edges
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def build_normalized_adjacency(graph: HeteroGraph) -> NormalizedAdjacency:
    n = graph.node_count
    a = raw_adjacency(graph) + sp.identity(n, format="csr")
    a = sp.csr_matrix(a)
    a.sum_duplicates()
    a.sort_indices()
    degree = np.diff(a.indptr).astype(np.int64)
    # Every stored value becomes 1/|N_v| for its row.
    a.data = np.repeat(1.0 / degree, degree)
    return NormalizedAdjacency(a, degree)
