"""Replay a finished simulation through the protocol library, one honest view
at a time, and compare the vote state with what the engine tracked.

The engine never builds real blocks or transactions; this rebuilds them:

* every filler block gets a transaction spending its own genesis output, so
  fillers never sit in the ledger future of a spend;
* spend ``s`` of contested output ``o`` spends genesis output ``n_blocks + o``.

Blocks are delivered to view ``i`` in the order they became solid there.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..ledger import LedgerState, Output, OutputId, Transaction
from ..tangle import Block, TangleView, block_ref, tx_ref
from ..voting import VotingView
from .engine import AW_TOL, Simulation


class Replay:
    def __init__(self, sim: Simulation):
        self.sim = sim
        n = sim.n_blocks
        outs = tuple(Output(1.0, "") for _ in range(n + len(sim.outputs)))
        self.genesis_tx = Transaction(sim.block_id(0) ^ 1, (), outs, 0.0)
        self.blocks: list[Block] = []
        self.txs: list[Transaction] = []
        for b in range(n):
            self.txs.append(self._tx(b))
            self.blocks.append(self._block(b))

    def _tx(self, b: int) -> Transaction:
        sim = self.sim
        if b == 0:
            return self.genesis_tx
        s = sim.spend_of[b]
        src = sim.n_blocks + sim.spends[s].output if s >= 0 else b
        return Transaction(sim.block_id(b) ^ 2, (OutputId(self.genesis_tx.id, src),), (Output(1.0, ""),),
                           sim.issue_time[b])

    def _block(self, b: int) -> Block:
        sim = self.sim
        if b == 0:
            return Block(sim.block_id(0), (), self.genesis_tx.id, -1, 0.0)
        refs = tuple(block_ref(sim.block_id(p)) if is_block else tx_ref(sim.block_id(p))
                     for p, is_block in sim.parents[b])
        return Block(sim.block_id(b), refs, self.txs[b].id, sim.issuer[b], sim.issue_time[b])

    def view(self, i: int, until: Optional[float] = None) -> VotingView:
        sim = self.sim
        until = sim.horizon if until is None else until
        col = sim.solid[: sim.n_blocks, i]
        order = [b for b in np.lexsort((np.arange(sim.n_blocks), col)).tolist() if b > 0 and col[b] <= until]
        tangle = TangleView(self.blocks[0], owner=i)
        ledger = LedgerState(self.genesis_tx)
        voting = VotingView(tangle, ledger, sim.table)
        for b in order:
            ledger.apply(self.txs[b])
            done = tangle.receive_block(self.blocks[b], float(col[b]))
            voting.observe(done.solidified)
        return voting

    def spend_tx(self, s: int):
        return self.txs[self.sim.spends[s].carrier].id

    def compare(self, i: int, until: Optional[float] = None) -> list[tuple]:
        """Mismatches ``(spend, engine AW, library AW)`` at view ``i``.

        The engine view must already be advanced to ``until`` (default: the horizon,
        which is where a finished run leaves every view)."""
        sim = self.sim
        until = sim.horizon if until is None else until
        voting = self.view(i, until)
        bad = []
        for s, info in enumerate(sim.spends):
            if info.carrier < 0 or sim.solid[info.carrier, i] > until:
                continue
            lib = voting.approval_weight(self.spend_tx(s))
            if abs(lib - sim.aw[i][s]) > AW_TOL:
                bad.append((s, sim.aw[i][s], lib))
        return bad


def replay_mismatches(sim: Simulation, views=None) -> dict:
    """Run :meth:`Replay.compare` at the horizon for the given views (default: all)."""
    rep = Replay(sim)
    views = range(sim.n_h) if views is None else views
    out = {}
    for i in views:
        bad = rep.compare(i)
        if bad:
            out[i] = bad
    return out
