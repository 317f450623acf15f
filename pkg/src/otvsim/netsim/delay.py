"""Package delays and flooding arrival times.

Blocks are forwarded on first receipt, so the arrival time of one block at
every node is a shortest-path problem over the honest graph.  Constant delays
use precomputed hop distances; random delays and held edges go through a
vectorized Bellman-Ford pass.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .config import DelayConfig
from .topology import Topology


class DelayModel:
    def __init__(self, cfg: DelayConfig, topo: Topology, rng: np.random.Generator):
        self.cfg = cfg
        self.topo = topo
        self.rng = rng
        self.constant = cfg.kind == "constant"

    @property
    def bound(self) -> float:
        return self.cfg.h if self.constant else self.cfg.delta

    def sample(self, n: int) -> np.ndarray:
        if self.constant:
            return np.full(n, self.cfg.h)
        delta, eps = self.cfg.delta, self.cfg.eps
        # (0, delta] with probability 1-eps, otherwise delta * (1 + Exp(1))
        d = delta * (1.0 - self.rng.random(n))
        if eps > 0:
            tail = self.rng.random(n) < eps
            if tail.any():
                d[tail] = delta * (1.0 + self.rng.exponential(1.0, int(tail.sum())))
        return d

    def arrivals(self, init: np.ndarray, hold: Optional[np.ndarray] = None, extra: Optional[np.ndarray] = None) -> np.ndarray:
        """Earliest arrival at every node given first-hand arrival times ``init``
        (inf where a node gets nothing directly).

        ``hold`` (per directed edge) delays delivery to at least that time;
        ``extra`` adds a fixed per-edge delay on top of the model's.
        """
        if self.constant and hold is None and extra is None:
            src = np.flatnonzero(np.isfinite(init))
            if len(src) == 0:
                return init.copy()
            if len(src) == 1:
                s = src[0]
                return init[s] + self.cfg.h * self.topo.hops[s]
            return (init[src, None] + self.cfg.h * self.topo.hops[src]).min(axis=0)
        return self._bellman_ford(init, hold, extra)

    def _bellman_ford(self, init, hold, extra) -> np.ndarray:
        t = self.topo
        d = self.sample(t.n_edges)
        if extra is not None:
            d = d + extra
        arr = init.astype(float).copy()
        for _ in range(t.n_nodes + 1):
            cand = arr[t.src] + d
            if hold is not None:
                cand = np.maximum(cand, hold)
            best = np.minimum.reduceat(cand, t.dst_start)
            new = np.minimum(arr, best)
            if np.array_equal(new, arr):
                break
            arr = new
        return arr
