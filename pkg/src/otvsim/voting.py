"""On Tangle Voting for one node's view.

Votes are implicit.  A block votes for every transaction in its voting past
cone: its own transaction, the transactions picked by its transaction
references, their ledger pasts, and whatever the blocks it block-references
voted for.  Blocks are processed in the view's solidification order.  The
issuer's latest block then decides which side of each conflict it stands on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .ledger import LedgerState, NotAConflict, is_branch
from .tangle import CONFIRM_TOL, Block, BlockId, Label, TangleView, check_theta
from .weights import WeightTable, weight_of_set


class InvalidVotingBranch(Exception):
    pass


class NotABranch(ValueError):
    pass


class VotingCone(NamedTuple):
    blocks: frozenset
    transactions: frozenset


class VotingBranchResult(NamedTuple):
    branch: frozenset
    valid: bool


class ChangeSet(NamedTuple):
    added: list
    revoked: list


@dataclass
class VotingView:
    tangle: TangleView
    ledger: LedgerState
    table: WeightTable
    tx_supporters: dict = field(default_factory=dict)
    last_vote_time: dict = field(default_factory=dict)
    aw_highwater: dict = field(default_factory=dict)
    invalid_blocks: set = field(default_factory=set)
    _cone_blocks: dict = field(default_factory=dict, repr=False)
    _cone_txs: dict = field(default_factory=dict, repr=False)

    # cones depend only on a solid block and the (append-only) ledger, so they are memoized

    def cone(self, x: BlockId) -> VotingCone:
        self.tangle.require_solid(x)
        if x not in self._cone_txs:
            self._build_cone(x)
        return VotingCone(self._cone_blocks[x], self._cone_txs[x])

    def _build_cone(self, x: BlockId) -> None:
        # iterative post-order so long chains do not hit the recursion limit
        stack = [x]
        while stack:
            b = stack[-1]
            if b in self._cone_txs:
                stack.pop()
                continue
            block = self.tangle.blocks[b]
            todo = [r.target for r in block.references
                    if r.label is Label.BLOCK and r.target not in self._cone_txs]
            if todo:
                stack.extend(todo)
                continue
            stack.pop()
            blocks = {b}
            txs = set(self.ledger.ancestors_or_self(block.transaction))
            for r in block.references:
                if r.label is Label.BLOCK:
                    blocks |= self._cone_blocks[r.target]
                    txs |= self._cone_txs[r.target]
                else:
                    target_tx = self.tangle.blocks[r.target].transaction
                    txs |= self.ledger.ancestors_or_self(target_tx)
            self._cone_blocks[b] = frozenset(blocks)
            self._cone_txs[b] = frozenset(txs)

    def voting_branch(self, x: BlockId) -> VotingBranchResult:
        members = self.cone(x).transactions & self.ledger.conflicts
        clash = any(self.ledger.conflict_edges.get(c, set()) & members for c in members)
        return VotingBranchResult(frozenset(members), not clash)

    def supporters(self, tx) -> set:
        return self.tx_supporters.get(tx, set())

    def approval_weight(self, tx) -> float:
        self.ledger.tx(tx)
        return weight_of_set(self.table, self.supporters(tx))

    def update(self, block: Block) -> ChangeSet:
        vb = self.voting_branch(block.id)
        if not vb.valid:
            self.invalid_blocks.add(block.id)
            raise InvalidVotingBranch(block.id)
        j = block.issuer
        now = self.tangle.solid_time[block.id]
        txs = self._cone_txs[block.id]
        added, revoked = [], []
        for t in txs:
            holders = self.tx_supporters.setdefault(t, set())
            if j not in holders:
                holders.add(j)
                added.append((t, j))
            self.last_vote_time[(j, t)] = now
        for t in self.ledger.conflicting_with_cone(vb.branch):
            holders = self.tx_supporters.get(t)
            if holders and j in holders:
                holders.discard(j)
                revoked.append((t, j))
        for t, _ in added:
            aw = self.approval_weight(t)
            if aw > self.aw_highwater.get(t, 0.0):
                self.aw_highwater[t] = aw
        return ChangeSet(sorted(added), sorted(revoked))

    def observe(self, block_ids: Iterable[BlockId]) -> list[ChangeSet]:
        out = []
        for b in block_ids:
            block = self.tangle.blocks[b]
            if block.is_genesis:
                continue
            try:
                out.append(self.update(block))
            except InvalidVotingBranch:
                out.append(ChangeSet([], []))
        return out


def voting_past_cone(view: VotingView, x: BlockId) -> VotingCone:
    return view.cone(x)


def voting_branch(view: VotingView, x: BlockId) -> VotingBranchResult:
    return view.voting_branch(x)


def update_supporters_on_block(view: VotingView, x: Block) -> ChangeSet:
    return view.update(x)


def approval_weight(view: VotingView, tx, table: Optional[WeightTable] = None) -> float:
    table = table or view.table
    view.ledger.tx(tx)
    return weight_of_set(table, view.supporters(tx))


def branch_approval_weight(view: VotingView, b: Iterable, table: Optional[WeightTable] = None) -> float:
    table = table or view.table
    b = set(b)
    try:
        ok = is_branch(view.ledger, b)
    except NotAConflict:
        ok = False
    if not ok:
        raise NotABranch(sorted(b))
    if not b:
        return 1.0
    common = set.intersection(*(set(view.supporters(c)) for c in b))
    return weight_of_set(table, common)


def is_tx_confirmed(view: VotingView, tx, theta: float) -> bool:
    check_theta(theta)
    view.ledger.tx(tx)
    return view.aw_highwater.get(tx, 0.0) >= theta - CONFIRM_TOL


def conflict_weight_fn(view: VotingView, table: Optional[WeightTable] = None):
    """AW restricted to the conflicts, as a callable for the reality selectors.

    Reads the live supporter sets, so a revocation shows up immediately.
    """
    table = table or view.table

    def weight(c) -> float:
        if c not in view.ledger.conflicts:
            raise NotAConflict(c)
        return weight_of_set(table, view.supporters(c))

    return weight


def recompute_supporters(tangle: TangleView, ledger: LedgerState, order: Optional[list] = None) -> dict:
    """From-scratch supporter sets, used as an oracle for ``VotingView.update``.

    Walks every block's voting past cone directly (no memo shared with the
    incremental path) and replays the add/revoke rule in solidification order.
    """
    order = order if order is not None else tangle.solid_order
    support: dict = {}
    for b in order:
        block = tangle.blocks[b]
        if block.is_genesis:
            continue
        cone_txs = _walk_voting_cone(tangle, ledger, b)
        members = {t for t in cone_txs if t in ledger.conflicts}
        if any(_directly_conflicting_pair(ledger, c, d) for c in members for d in members):
            continue
        j = block.issuer
        for t in cone_txs:
            support.setdefault(t, set()).add(j)
        for t in list(support):
            if j in support[t] and any(_conflicting_slow(ledger, t, u) for u in cone_txs):
                support[t].discard(j)
    return support


def _walk_voting_cone(tangle: TangleView, ledger: LedgerState, x: BlockId) -> set:
    seen_blocks, txs = set(), set()
    todo = [("b", x)]
    while todo:
        kind, v = todo.pop()
        if kind == "b":
            if v in seen_blocks:
                continue
            seen_blocks.add(v)
            block = tangle.blocks[v]
            todo.append(("t", block.transaction))
            for r in block.references:
                if r.label is Label.BLOCK:
                    todo.append(("b", r.target))
                else:
                    todo.append(("t", tangle.blocks[r.target].transaction))
        else:
            if v in txs:
                continue
            txs.add(v)
            for o in ledger.txs[v].inputs:
                todo.append(("t", o.tx))
    return txs


def _ledger_ancestors(ledger: LedgerState, t) -> set:
    out, todo = set(), [t]
    while todo:
        v = todo.pop()
        if v not in out:
            out.add(v)
            todo.extend(o.tx for o in ledger.txs[v].inputs)
    return out


def _directly_conflicting_pair(ledger: LedgerState, a, b) -> bool:
    return a != b and bool(set(ledger.txs[a].inputs) & set(ledger.txs[b].inputs))


def _conflicting_slow(ledger: LedgerState, a, b) -> bool:
    if a == b:
        return False
    aa, bb = _ledger_ancestors(ledger, a), _ledger_ancestors(ledger, b)
    return any(_directly_conflicting_pair(ledger, x, y) for x in aa for y in bb)


def branch_weight_sum(view: VotingView, branch: Iterable) -> float:
    return math.fsum(view.approval_weight(c) for c in branch)
