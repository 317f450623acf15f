"""Uniform random tip selection restricted to a reality (R-URTS).

The draw loop is written once against three callbacks so the exact per-view
library path and the vectorized simulator share it:

* ``cone_branch(tip)``  conflicts in the tip's voting past cone
* ``tx_branch(tip)``    conflicts in the Ledger past cone of the tip's transaction
* ``clash(a, b)``       whether two conflict sets contain a conflicting pair
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .ledger import LedgerState
from .tangle import BlockId, TangleView
from .voting import VotingView

DRAW_BUDGET_PER_REF = 64


class NoEligibleTip(RuntimeError):
    pass


class TipChoice(NamedTuple):
    block_refs: tuple
    tx_refs: tuple
    exhausted: bool = False

    @property
    def count(self) -> int:
        return len(self.block_refs) + len(self.tx_refs)


def restricted_draw(
    tips: Sequence[BlockId],
    reality: frozenset,
    k: int,
    rng: np.random.Generator,
    cone_branch: Callable,
    tx_branch: Callable,
    clash: Callable,
    *,
    start: frozenset = frozenset(),
    budget: Optional[int] = None,
) -> tuple[list, list, frozenset, bool]:
    """Core draw loop.  Returns ``(block_refs, tx_refs, branch, exhausted)``.

    ``k`` successful draws are made with replacement; repeated picks count
    towards ``k`` but are only emitted once.  ``start`` is the branch the new
    block already carries (its own transaction) and every accepted draw must
    keep the union conflict-free.
    """
    if k < 1:
        raise ValueError("k must be positive")
    budget = DRAW_BUDGET_PER_REF * k if budget is None else budget
    blocks: dict = {}
    txs: dict = {}
    branch = frozenset(start)
    if not tips:
        return [], [], branch, True
    cnt = draws = 0
    # one batch of indices per round keeps the rng call count low
    while cnt < k and draws < budget:
        for idx in rng.integers(0, len(tips), size=min(budget - draws, 2 * k)):
            draws += 1
            tip = tips[int(idx)]
            if tip in blocks or tip in txs:
                cnt += 1
            else:
                vb = cone_branch(tip)
                if vb <= reality and not clash(branch, vb):
                    blocks[tip] = None
                    branch = branch | vb
                    cnt += 1
                else:
                    tb = tx_branch(tip)
                    if tb <= reality and not clash(branch, tb):
                        txs[tip] = None
                        branch = branch | tb
                        cnt += 1
            if cnt >= k or draws >= budget:
                break
    return list(blocks), list(txs), branch, cnt < k


def r_urts(
    tangle: TangleView,
    ledger: LedgerState,
    voting: VotingView,
    r,
    k: int,
    rng: np.random.Generator,
    *,
    own_tx=None,
    last_block: Optional[BlockId] = None,
    budget: Optional[int] = None,
) -> TipChoice:
    """R-URTS over the view's current tips.

    When fewer than ``k`` tips could be drawn within the budget the choice is
    marked ``exhausted``.  If nothing at all was eligible, ``last_block`` (the
    issuer's own previous block) is used as a transaction reference; without it
    ``NoEligibleTip`` is raised.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    reality = frozenset(r)
    edges = ledger.conflict_edges

    def clash(a, b):
        small, big = (a, b) if len(a) <= len(b) else (b, a)
        return any(edges.get(c, set()) & big for c in small)

    def cone_branch(tip):
        return voting.voting_branch(tip).branch

    def tx_branch(tip):
        return ledger.branch(tangle.blocks[tip].transaction)

    start = ledger.branch(own_tx) if own_tx is not None else frozenset()
    tips = sorted(tangle.tips())
    blocks, txs, _, exhausted = restricted_draw(
        tips, reality, k, rng, cone_branch, tx_branch, clash, start=start, budget=budget)
    if not blocks and not txs:
        if last_block is None:
            raise NoEligibleTip(f"no tip compatible with a reality of {len(reality)} conflicts")
        return TipChoice((), (last_block,), True)
    return TipChoice(tuple(blocks), tuple(txs), exhausted)
