"""UTXO ledger: transactions, conflicts, Conflict DAG / Conflict Graph and branches.

The Ledger DAG points from a spender to the transactions whose outputs it
consumes.  "Ancestors" below always means that direction: the transactions in
a transaction's ledger past cone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

TransactionId = int


class OutputId(NamedTuple):
    tx: TransactionId
    index: int


class Output(NamedTuple):
    value: float
    owner: object


@dataclass(frozen=True)
class Transaction:
    id: TransactionId
    inputs: tuple[OutputId, ...]
    outputs: tuple[Output, ...]
    issue_time: float = 0.0

    @property
    def is_genesis(self) -> bool:
        return not self.inputs

    def output_ids(self) -> list[OutputId]:
        return [OutputId(self.id, i) for i in range(len(self.outputs))]


class LedgerError(Exception):
    pass


class UnknownInput(LedgerError):
    pass


class UnknownTransaction(LedgerError, KeyError):
    pass


class ValueMismatch(LedgerError):
    pass


class PastConeDoubleSpend(LedgerError):
    pass


class DuplicateTransaction(LedgerError):
    pass


class NotAConflict(LedgerError):
    pass


class NotAReality(LedgerError):
    pass


class ApplyOutcome(NamedTuple):
    new_conflicts: frozenset
    updated_edges: int


VALUE_TOL = 1e-9


@dataclass
class ConflictGraphView:
    """Read-only snapshot handed to the reality selectors.

    ``ancestors[c]`` holds the conflicts strictly below ``c`` in the Conflict DAG
    (towards genesis); ``edges[c]`` its Conflict Graph neighbours.
    """

    conflicts: frozenset
    edges: dict
    ancestors: dict

    def neighbors(self, c) -> frozenset:
        return self.edges.get(c, frozenset())

    def restrict(self, keep: Iterable) -> "ConflictGraphView":
        keep = frozenset(keep) & self.conflicts
        return ConflictGraphView(
            keep,
            {c: frozenset(self.edges.get(c, ())) & keep for c in keep},
            {c: frozenset(self.ancestors.get(c, ())) & keep for c in keep},
        )


@dataclass
class LedgerState:
    genesis: Transaction
    txs: dict = field(default_factory=dict)
    spenders: dict = field(default_factory=dict)
    conflicts: set = field(default_factory=set)
    conflict_edges: dict = field(default_factory=dict)
    conflict_dag_parents: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.genesis
        if not g.is_genesis:
            raise LedgerError("genesis transaction must have no inputs")
        self.txs[g.id] = g
        # memoized ancestry: ancestors-or-self, and every (output -> spender) inside it
        self._anc = {g.id: frozenset([g.id])}
        self._spent_in_cone = {g.id: {}}
        self._children: dict = {g.id: set()}
        self._order = [g.id]

    # -- queries ---------------------------------------------------------------

    def __contains__(self, tx_id) -> bool:
        return tx_id in self.txs

    def tx(self, tx_id) -> Transaction:
        try:
            return self.txs[tx_id]
        except KeyError:
            raise UnknownTransaction(tx_id) from None

    def ancestors_or_self(self, tx_id) -> frozenset:
        self.tx(tx_id)
        return self._anc[tx_id]

    def descendants_or_self(self, tx_id) -> set:
        self.tx(tx_id)
        out = {tx_id}
        todo = [tx_id]
        while todo:
            for c in self._children[todo.pop()]:
                if c not in out:
                    out.add(c)
                    todo.append(c)
        return out

    def producers(self, tx: Transaction) -> set:
        return {o.tx for o in tx.inputs}

    def direct_partners(self, tx_id) -> set:
        """Transactions sharing at least one input with ``tx_id``."""
        tx = self.tx(tx_id)
        out = set()
        for o in tx.inputs:
            out |= self.spenders.get(o, set())
        out.discard(tx_id)
        return out

    def branch(self, tx_id) -> frozenset:
        return frozenset(self.ancestors_or_self(tx_id) & self.conflicts)

    # -- mutation ----------------------------------------------------------------

    def apply(self, tx: Transaction) -> ApplyOutcome:
        if tx.id in self.txs:
            raise DuplicateTransaction(tx.id)
        if tx.is_genesis:
            raise LedgerError("only the genesis transaction may have no inputs")
        in_value = []
        for o in tx.inputs:
            src = self.txs.get(o.tx)
            if src is None or not 0 <= o.index < len(src.outputs):
                raise UnknownInput(o)
            in_value.append(src.outputs[o.index].value)
        out_value = math.fsum(v.value for v in tx.outputs)
        if any(v.value < 0 for v in tx.outputs) or abs(math.fsum(in_value) - out_value) > VALUE_TOL:
            raise ValueMismatch(f"inputs {math.fsum(in_value)} != outputs {out_value}")

        # the past cone has to be free of double spends, including tx's own inputs
        spent: dict = {}
        anc = {tx.id}
        for p in self.producers(tx):
            anc |= self._anc[p]
            for o, who in self._spent_in_cone[p].items():
                if spent.setdefault(o, who) != who:
                    raise PastConeDoubleSpend(f"output {o} spent twice in the past cone of {tx.id:x}")
        for o in tx.inputs:
            if spent.setdefault(o, tx.id) != tx.id:
                raise PastConeDoubleSpend(f"{tx.id:x} re-spends {o} already consumed in its past cone")

        self.txs[tx.id] = tx
        self._anc[tx.id] = frozenset(anc)
        self._spent_in_cone[tx.id] = spent
        self._children[tx.id] = set()
        self._order.append(tx.id)
        for p in self.producers(tx):
            self._children[p].add(tx.id)

        fresh = set()
        for o in tx.inputs:
            who = self.spenders.setdefault(o, set())
            who.add(tx.id)
            if len(who) >= 2:
                fresh |= who - self.conflicts
        self.conflicts |= fresh

        added = 0
        for c in sorted(fresh):
            self.conflict_edges.setdefault(c, set())
            for d in self._conflicting_conflicts(c):
                if d not in self.conflict_edges[c]:
                    self.conflict_edges[c].add(d)
                    self.conflict_edges.setdefault(d, set()).add(c)
                    added += 1
        if fresh:
            touched = set()
            for c in fresh:
                touched |= self.descendants_or_self(c)
            for c in touched & self.conflicts:
                self.conflict_dag_parents[c] = self._dag_parents(c)
        return ApplyOutcome(frozenset(fresh), added)

    def _conflicting_conflicts(self, c) -> set:
        return {d for d in self._conflicting_txs(self._anc[c]) if d in self.conflicts}

    def _conflicting_txs(self, cone: Iterable) -> set:
        """Every transaction with an ancestor-or-self that directly conflicts with a member of ``cone``."""
        hit = set()
        for a in cone:
            if a in self.conflicts:
                hit |= self.direct_partners(a)
        out = set()
        for b in hit:
            out |= self.descendants_or_self(b)
        return out

    def _dag_parents(self, c) -> frozenset:
        below = (self._anc[c] - {c}) & self.conflicts
        if not below:
            return frozenset([self.genesis.id])
        return frozenset(d for d in below if not any(d in self._anc[e] and d != e for e in below))

    def conflicting_with_cone(self, cone: Iterable) -> set:
        return self._conflicting_txs(cone)

    # -- graph views -----------------------------------------------------------

    def conflict_graph(self) -> ConflictGraphView:
        cs = frozenset(self.conflicts)
        return ConflictGraphView(
            cs,
            {c: frozenset(self.conflict_edges.get(c, ())) for c in cs},
            {c: frozenset((self._anc[c] - {c}) & cs) for c in cs},
        )

    def snapshot_jsonl(self) -> str:
        lines = []
        for t in self._order:
            tx = self.txs[t]
            lines.append(json.dumps({
                "id": t,
                "inputs": [[o.tx, o.index] for o in tx.inputs],
                "outputs": [[o.value, str(o.owner)] for o in tx.outputs],
                "conflicts_with": sorted(self.conflict_edges.get(t, ())),
            }))
        return "\n".join(lines)

    def conflict_graph_dot(self, names: Optional[dict] = None) -> str:
        name = (lambda c: names.get(c, f"{c:x}")) if names else (lambda c: f"{c:x}")
        out = ["graph conflicts {"]
        for c in sorted(self.conflicts):
            out.append(f'  "{name(c)}";')
        for c in sorted(self.conflicts):
            for d in sorted(self.conflict_edges.get(c, ())):
                if c < d:
                    out.append(f'  "{name(c)}" -- "{name(d)}";')
        out.append("}")
        return "\n".join(out)


# -- module-level operations ------------------------------------------------------


def apply_transaction(state: LedgerState, tx: Transaction) -> ApplyOutcome:
    return state.apply(tx)


def directly_conflicting(state: LedgerState, a, b) -> bool:
    ta, tb = state.tx(a), state.tx(b)
    if a == b:
        return False
    return bool(set(ta.inputs) & set(tb.inputs))


def conflicting(state: LedgerState, a, b) -> bool:
    state.tx(a)
    state.tx(b)
    if a == b:
        return False
    return b in state._conflicting_txs(state.ancestors_or_self(a))


def is_conflict_free(state: LedgerState, members: Iterable) -> bool:
    members = list(members)
    hit = state.conflicting_with_cone(members)
    return not (hit & set(members))


def is_branch(state: LedgerState, s: Iterable) -> bool:
    s = set(s)
    if not s <= state.conflicts:
        raise NotAConflict(sorted(s - state.conflicts))
    for c in s:
        if not state.branch(c) <= s:
            return False
    return all(not (state.conflict_edges.get(c, set()) & s) for c in s)


def maximal_contained_branch(state: LedgerState, tx_id) -> frozenset:
    return state.branch(tx_id)


def is_reality(state: LedgerState, r: Iterable) -> bool:
    r = set(r)
    if not is_branch(state, r):
        return False
    return all(state.conflict_edges.get(c, set()) & r for c in state.conflicts - r)


def ledger_of_reality(state: LedgerState, r: Iterable) -> set:
    r = frozenset(r)
    if not is_reality(state, r):
        raise NotAReality(sorted(r))
    return {t for t in state.txs if state.branch(t) <= r}
