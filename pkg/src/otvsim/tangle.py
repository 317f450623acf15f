"""Blocks, local Tangle views, solidification, cones and Witness Weight."""

from __future__ import annotations

import enum
import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional

from .weights import NodeId, WeightTable, weight_of_set

BlockId = int
TransactionId = int


class Label(enum.Enum):
    BLOCK = "BlockVote"
    TX = "TransactionVote"


class Reference(NamedTuple):
    target: BlockId
    label: Label


def block_ref(target: BlockId) -> Reference:
    return Reference(target, Label.BLOCK)


def tx_ref(target: BlockId) -> Reference:
    return Reference(target, Label.TX)


CONFIRM_TOL = 1e-12


class TangleError(Exception):
    pass


class DuplicateBlock(TangleError):
    pass


class UnknownBlock(TangleError, KeyError):
    pass


class MalformedBlock(TangleError, ValueError):
    pass


class ThetaOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    id: BlockId
    references: tuple[Reference, ...]
    transaction: TransactionId
    issuer: NodeId
    issue_time: float = 0.0

    @property
    def parents(self) -> tuple[BlockId, ...]:
        """Distinct reference targets, first-occurrence order."""
        return tuple(dict.fromkeys(r.target for r in self.references))

    @property
    def is_genesis(self) -> bool:
        return not self.references

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "issuer": self.issuer,
            "issue_time": self.issue_time,
            "refs": [{"target": r.target, "label": r.label.value} for r in self.references],
            "tx": self.transaction,
        }


def check_theta(theta: float) -> None:
    if not 0.5 < theta <= 1.0:
        raise ThetaOutOfRange(f"theta={theta} not in (0.5, 1]")


def validate_block(block: Block, max_refs: Optional[int] = None) -> None:
    n = len(block.references)
    if n == 0:
        return
    if n < 2:
        raise MalformedBlock(f"block {block.id:x} carries {n} reference(s); at least 2 needed")
    if max_refs is not None and n > max_refs:
        raise MalformedBlock(f"block {block.id:x} carries {n} references; k={max_refs}")


class SolidificationOutcome(NamedTuple):
    solidified: list[BlockId]
    missing: list[BlockId]


class TangleView:
    """One node's local copy of the Tangle.

    Blocks whose parents are not all solid wait in ``pending``.  When the last
    missing parent turns up they are solidified in topological order and stamped
    with the same time.
    """

    def __init__(self, genesis: Block, owner: NodeId = -1, max_refs: Optional[int] = None):
        if not genesis.is_genesis:
            raise MalformedBlock("genesis must carry no references")
        self.owner = owner
        self.max_refs = max_refs
        self.genesis = genesis.id
        self.blocks: dict[BlockId, Block] = {genesis.id: genesis}
        self.children: dict[BlockId, list[BlockId]] = {genesis.id: []}
        self.solid: set[BlockId] = {genesis.id}
        self.solid_time: dict[BlockId, float] = {genesis.id: 0.0}
        self.solid_order: list[BlockId] = [genesis.id]
        self.pending: dict[BlockId, set[BlockId]] = {}
        self._waiting_on: dict[BlockId, set[BlockId]] = {}
        self._tips: set[BlockId] = {genesis.id}

    def __contains__(self, block_id: BlockId) -> bool:
        return block_id in self.solid

    def __len__(self) -> int:
        return len(self.solid)

    def block(self, block_id: BlockId) -> Block:
        try:
            return self.blocks[block_id]
        except KeyError:
            raise UnknownBlock(block_id) from None

    def require_solid(self, block_id: BlockId) -> None:
        if block_id not in self.solid:
            raise UnknownBlock(block_id)

    def receive_block(self, block: Block, now: float) -> SolidificationOutcome:
        if block.id in self.solid or block.id in self.pending:
            raise DuplicateBlock(block.id)
        validate_block(block, self.max_refs)
        missing = [p for p in block.parents if p not in self.solid]
        self.blocks[block.id] = block
        if missing:
            self.pending[block.id] = set(missing)
            for p in missing:
                self._waiting_on.setdefault(p, set()).add(block.id)
            unseen = [p for p in missing if p not in self.blocks]
            return SolidificationOutcome([], unseen)
        return SolidificationOutcome(self._solidify_from(block.id, now), [])

    def _solidify_from(self, root: BlockId, now: float) -> list[BlockId]:
        # Kahn-style release of waiting descendants; a heap on the id keeps
        # equal-time siblings in a deterministic order without breaking topology.
        done = []
        ready = [root]
        while ready:
            bid = heapq.heappop(ready)
            self._mark_solid(bid, now)
            done.append(bid)
            for child in sorted(self._waiting_on.pop(bid, ())):
                waiting = self.pending[child]
                waiting.discard(bid)
                if not waiting:
                    del self.pending[child]
                    heapq.heappush(ready, child)
        return done

    def _mark_solid(self, bid: BlockId, now: float) -> None:
        block = self.blocks[bid]
        self.solid.add(bid)
        self.solid_time[bid] = now
        self.solid_order.append(bid)
        self.children.setdefault(bid, [])
        for p in block.parents:
            self.children[p].append(bid)
            self._tips.discard(p)
        self._tips.add(bid)

    def tips(self) -> set[BlockId]:
        return set(self._tips)

    def past_cone(self, x: BlockId) -> set[BlockId]:
        self.require_solid(x)
        return _closure(x, lambda b: self.blocks[b].parents)

    def future_cone(self, x: BlockId) -> set[BlockId]:
        self.require_solid(x)
        return _closure(x, lambda b: self.children[b])

    def snapshot_jsonl(self) -> str:
        return "\n".join(json.dumps(self.blocks[b].to_record()) for b in self.solid_order)


def _closure(start, step) -> set:
    seen = {start}
    todo = deque([start])
    while todo:
        for nxt in step(todo.popleft()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def receive_block(view: TangleView, block: Block, now: float) -> SolidificationOutcome:
    return view.receive_block(block, now)


def tips(view: TangleView) -> set[BlockId]:
    return view.tips()


def past_cone(view: TangleView, x: BlockId) -> set[BlockId]:
    return view.past_cone(x)


def future_cone(view: TangleView, x: BlockId) -> set[BlockId]:
    return view.future_cone(x)


def block_supporters(view: TangleView, x: BlockId) -> set[NodeId]:
    # genesis has no issuer that carries weight
    return {view.blocks[b].issuer for b in view.future_cone(x) if not view.blocks[b].is_genesis}


def witness_weight(view: TangleView, x: BlockId, table: WeightTable) -> float:
    return weight_of_set(table, block_supporters(view, x))


def is_block_confirmed(
    view: TangleView,
    x: BlockId,
    theta: float,
    history: dict[BlockId, float],
    table: Optional[WeightTable] = None,
) -> bool:
    """Sticky confirmation: the running maximum of WW(x) kept in ``history`` reached ``theta``.

    With ``table`` given the current WW is folded into ``history`` first; without it
    the map is read as is (e.g. ``WitnessTracker.high_water``).
    """
    check_theta(theta)
    view.require_solid(x)
    if table is not None:
        history[x] = max(history.get(x, 0.0), witness_weight(view, x, table))
    return history.get(x, 0.0) >= theta - CONFIRM_TOL


@dataclass
class WitnessTracker:
    """Incremental WW for one view.

    Each block keeps a bitmask of the issuers seen in its future cone.  A new
    block by ``j`` walks its past cone and stops wherever bit ``j`` is already
    set; everything behind such a block has the bit too (the monotonicity lemma),
    so the walk only touches blocks that actually change.
    """

    view: TangleView
    table: WeightTable
    theta: float = 2 / 3
    masks: dict[BlockId, int] = field(default_factory=dict)
    ww: dict[BlockId, float] = field(default_factory=dict)
    high_water: dict[BlockId, float] = field(default_factory=dict)
    confirmed_at: dict[BlockId, float] = field(default_factory=dict)

    def __post_init__(self):
        check_theta(self.theta)
        for bid in self.view.solid_order:
            self.observe(bid)

    def observe(self, bid: BlockId) -> None:
        view = self.view
        block = view.blocks[bid]
        self.masks.setdefault(bid, 0)
        self.ww.setdefault(bid, 0.0)
        if block.is_genesis:
            return
        j = block.issuer
        bit = 1 << j
        w = self.table[j]
        now = view.solid_time[bid]
        todo = [bid]
        while todo:
            b = todo.pop()
            m = self.masks[b]
            if m & bit:
                continue
            self.masks[b] = m | bit
            value = self.ww[b] + w
            self.ww[b] = value
            if value > self.high_water.get(b, 0.0):
                self.high_water[b] = value
            if b not in self.confirmed_at and value >= self.theta - CONFIRM_TOL:
                self.confirmed_at[b] = now
            todo.extend(view.blocks[b].parents)

    def observe_all(self, bids: Iterable[BlockId]) -> None:
        for b in bids:
            self.observe(b)

    def supporters(self, bid: BlockId) -> set[NodeId]:
        m = self.masks[bid]
        return {i for i in range(self.table.total_nodes) if m >> i & 1}

    def time_to_confirmation(self, bid: BlockId) -> Optional[float]:
        if bid not in self.confirmed_at:
            return None
        return self.confirmed_at[bid] - self.view.solid_time[bid]


def iter_blocks_jsonl(text: str) -> Iterator[Block]:
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        refs = tuple(Reference(r["target"], Label(r["label"])) for r in rec["refs"])
        yield Block(rec["id"], refs, rec["tx"], rec["issuer"], rec["issue_time"])
