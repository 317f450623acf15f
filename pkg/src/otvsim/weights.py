"""Node identities and the normalized weight function.

A node is just an integer index in ``[0, N)``.  Weights are fractions summing
to one; the same table drives both the issuance rates and the vote mass.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

NodeId = int

NORMALIZATION_TOL = 1e-12


class WeightError(ValueError):
    pass


class AllZeroWeights(WeightError):
    pass


class NegativeWeight(WeightError):
    pass


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True)
class WeightTable:
    weights: tuple[float, ...]
    raw: tuple[float, ...]

    @property
    def total_nodes(self) -> int:
        return len(self.weights)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, node: NodeId) -> float:
        if not 0 <= node < len(self.weights):
            raise UnknownNode(node)
        return self.weights[node]

    def __iter__(self):
        return iter(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def to_json(self) -> str:
        return json.dumps(list(self.raw))

    @classmethod
    def from_json(cls, text: str) -> "WeightTable":
        return new_weight_table(json.loads(text))


def new_weight_table(raw_weights: Sequence[float]) -> WeightTable:
    """Normalize ``raw_weights`` so they sum to one; node ``i`` gets entry ``i``."""
    raw = tuple(float(v) for v in raw_weights)
    if not raw:
        raise AllZeroWeights("empty weight list")
    if any(v < 0 for v in raw):
        raise NegativeWeight(f"negative entry in {raw!r}")
    total = math.fsum(raw)
    if total <= 0:
        raise AllZeroWeights("every weight is zero")
    weights = tuple(v / total for v in raw)
    # the division can leave a few ulps of slack; it stays well inside the tolerance
    assert abs(math.fsum(weights) - 1.0) <= NORMALIZATION_TOL
    return WeightTable(weights=weights, raw=raw)


def zipf_weights(n_nodes: int, s: float) -> WeightTable:
    """Zipf law: rank ``r`` (1-based, in NodeId order) gets ``r**-s`` before normalizing."""
    if n_nodes < 1:
        raise WeightError("n_nodes must be >= 1")
    if s < 0:
        raise WeightError("zipf exponent must be >= 0")
    return new_weight_table([r ** -s for r in range(1, n_nodes + 1)])


def weight_of_set(table: WeightTable, nodes: Iterable[NodeId]) -> float:
    total = []
    for node in nodes:
        total.append(table[node])
    return math.fsum(total)
