"""Honest communication graph: construction, hop distances and edge lists."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .config import ConfigError, TopologyConfig


@dataclass
class Topology:
    n_nodes: int
    adjacency: list  # sorted neighbour lists
    kind: str

    def __post_init__(self):
        src, dst = [], []
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                src.append(i)
                dst.append(j)
        # directed edges, both directions present, grouped by destination
        order = np.lexsort((np.array(src), np.array(dst)))
        self.src = np.array(src, dtype=np.int64)[order]
        self.dst = np.array(dst, dtype=np.int64)[order]
        self.dst_start = np.searchsorted(self.dst, np.arange(self.n_nodes))
        self._hops = None

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def hops(self) -> np.ndarray:
        if self._hops is None:
            m = csr_matrix((np.ones(self.n_edges), (self.src, self.dst)), shape=(self.n_nodes,) * 2)
            self._hops = shortest_path(m, unweighted=True, directed=False)
        return self._hops

    def is_connected(self) -> bool:
        return bool(np.isfinite(self.hops).all())

    def diameter(self) -> int:
        return int(self.hops.max())


def from_graph(g: nx.Graph, kind: str) -> Topology:
    n = g.number_of_nodes()
    adj = [sorted(g.neighbors(i)) for i in range(n)]
    return Topology(n, adj, kind)


def build_topology(n: int, cfg: TopologyConfig, rng: np.random.Generator) -> Topology:
    if cfg.kind == "complete":
        return from_graph(nx.complete_graph(n), "complete")
    if cfg.kind == "watts_strogatz":
        seed = int(rng.integers(0, 2**31 - 1))
        try:
            g = nx.connected_watts_strogatz_graph(n, cfg.neighbours, cfg.rewiring, tries=1000, seed=seed)
        except nx.NetworkXError as e:
            raise ConfigError(f"could not build a connected Watts-Strogatz graph: {e}") from None
        return from_graph(g, "watts_strogatz")
    raise ConfigError(f"unknown topology {cfg.kind!r}")


def connected_group(topo: Topology, size: int, rng: np.random.Generator) -> list[int]:
    """``size`` nodes grown by BFS from a random start, so the group is connected."""
    start = int(rng.integers(topo.n_nodes))
    seen = [start]
    mark = {start}
    i = 0
    while len(seen) < size and i < len(seen):
        for j in topo.adjacency[seen[i]]:
            if j not in mark and len(seen) < size:
                mark.add(j)
                seen.append(j)
        i += 1
    return sorted(seen)
