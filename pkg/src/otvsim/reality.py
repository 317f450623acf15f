"""Reality selection over the Conflict Graph.

Two selectors share the same skeleton: repeatedly take the best candidate among
the *roots* of the unresolved set (conflicts none of whose Conflict-DAG
ancestors are still unresolved), add it, and drop it together with its
neighbours.  They differ in how "best" is judged.
"""

from __future__ import annotations

from typing import Callable, Collection, Iterable, Optional

from .ids import coin_digest
from .ledger import ConflictGraphView

ConflictWeightFn = Callable[[int], float]

WEIGHT_TOL = 1e-9


class InconsistentWeights(ValueError):
    pass


class CoinOutOfRange(ValueError):
    pass


def _roots(graph: ConflictGraphView, unresolved: set) -> list:
    return [c for c in unresolved if not (graph.ancestors.get(c, frozenset()) & unresolved)]


def check_weights(graph: ConflictGraphView, w: ConflictWeightFn) -> None:
    for c in graph.conflicts:
        wc = w(c)
        if not -WEIGHT_TOL <= wc <= 1 + WEIGHT_TOL:
            raise InconsistentWeights(f"weight {wc} of {c:x} outside [0, 1]")
        for a in graph.ancestors.get(c, ()):
            if wc > w(a) + WEIGHT_TOL:
                raise InconsistentWeights(f"{c:x} outweighs its ancestor {a:x}")
        for d in graph.neighbors(c):
            if c < d and wc + w(d) > 1 + WEIGHT_TOL:
                raise InconsistentWeights(f"{c:x} and {d:x} together exceed 1")


def select_reality(
    graph: ConflictGraphView,
    w: ConflictWeightFn,
    *,
    strict: bool = False,
    prefer: Optional[Collection] = None,
) -> frozenset:
    """Weight-greedy maximal independent set, ties to the smaller digest.

    ``prefer`` lets a caller keep its current opinion on exact ties: among
    equally heavy roots the preferred ones win before the digest is consulted.
    """
    if strict:
        check_weights(graph, w)
    prefer = frozenset(prefer or ())
    unresolved = set(graph.conflicts)
    chosen = set()
    while unresolved:
        best = max(_roots(graph, unresolved), key=lambda c: (w(c), c in prefer, -c))
        chosen.add(best)
        unresolved -= graph.neighbors(best)
        unresolved.discard(best)
    return frozenset(chosen)


def select_reality_with_coin(
    graph: ConflictGraphView,
    aw: ConflictWeightFn,
    x: float,
    *,
    theta: float = 1.0,
    trace: Optional[list] = None,
) -> frozenset:
    """Common-coin variant: admit heavy roots while their AW beats ``x``, then fill by digest(c || x).

    Ties in the first phase go to the larger digest.  ``trace`` (if given)
    collects ``(phase, conflict)`` pairs in admission order.
    """
    if not 0.5 <= x <= theta:
        raise CoinOutOfRange(f"x={x} not in [0.5, {theta}]")
    unresolved = set(graph.conflicts)
    chosen = set()

    def admit(c, phase):
        chosen.add(c)
        unresolved.difference_update(graph.neighbors(c))
        unresolved.discard(c)
        if trace is not None:
            trace.append((phase, c))

    while unresolved:
        best = max(_roots(graph, unresolved), key=lambda c: (aw(c), c))
        if aw(best) <= x:
            break
        admit(best, 1)
    while unresolved:
        admit(max(_roots(graph, unresolved), key=lambda c: coin_digest(c, x)), 2)
    return frozenset(chosen)


def verify_reality(graph: ConflictGraphView, r: Iterable) -> bool:
    r = set(r)
    if not r <= graph.conflicts:
        return False
    for c in r:
        if graph.neighbors(c) & r:
            return False
        if not graph.ancestors.get(c, frozenset()) <= r:
            return False
    return all(graph.neighbors(c) & r for c in graph.conflicts - r)
