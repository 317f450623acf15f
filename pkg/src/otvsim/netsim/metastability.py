"""The four-node delay schedule that keeps inverting honest opinions.

Everything here runs on the library views directly (one TangleView, Ledger
and VotingView per node) with hand-scheduled deliveries, so the fixture is
exact rather than statistical.

Round ``r`` starts at ``t0 + r * gamma``: every node attaches a block that
transaction-references the spend it currently prefers (and its own previous
block).  Packages from {1, 2} to {3, 4} and from {3, 4} to {1, 2} take
``delta``; packages inside each pair take ``gamma``.  After each delivery a
node re-selects its reality, keeping its own opinion on a 50/50 tie.
Packages landing at the same instant are applied one at a time in
(sender, receiver) order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..ids import digest64
from ..ledger import LedgerState, Output, OutputId, Transaction
from ..reality import select_reality
from ..tangle import Block, TangleView, tx_ref
from ..voting import VotingView, conflict_weight_fn
from ..weights import new_weight_table


class WrongFixture(ValueError):
    pass


N = 4
WALLET = 4  # zero-weight identity that issues both spends, so they carry no vote


def _id(*parts) -> int:
    return digest64(b"meta1", *(str(p).encode() for p in parts))


def attack_delay(src: int, dst: int, delta: float, gamma: float) -> float:
    same_pair = (src < 2) == (dst < 2)
    return gamma if same_pair else delta


@dataclass
class MetaFixture:
    delta: float
    gamma: float
    t0: float = 0.0
    delay_fn: Optional[Callable] = None  # (src, dst, round) -> delay; default is the attack schedule
    initial: tuple = ("x", "x", "y", "y")
    views: list = field(default_factory=list)
    prefs: list = field(default_factory=list)
    history: list = field(default_factory=list)  # (time, node, new preference)

    def __post_init__(self):
        if not 0 < self.delta < self.gamma:
            raise WrongFixture("need 0 < delta < gamma")
        if len(self.initial) != N or set(self.initial) - {"x", "y"}:
            raise WrongFixture("need one initial preference in {x, y} per node")
        self.table = new_weight_table([1, 1, 1, 1, 0])
        outs = tuple(Output(1.0, f"n{i}") for i in range(N + 1))
        self.genesis_tx = Transaction(_id("tx", "genesis"), (), outs, 0.0)
        self.genesis = Block(_id("block", "genesis"), (), self.genesis_tx.id, -1, 0.0)
        # both spends of the wallet output, issued by the zero-weight wallet
        self.spend_tx = {}
        self.spend_block = {}
        for name in ("x", "y"):
            t = Transaction(_id("tx", name), (OutputId(self.genesis_tx.id, WALLET),), (Output(1.0, name),), 0.0)
            b = Block(_id("block", name), (tx_ref(self.genesis.id), tx_ref(self.genesis.id)), t.id, WALLET, 0.0)
            self.spend_tx[name] = t
            self.spend_block[name] = b
        for i in range(N):
            tangle = TangleView(self.genesis, owner=i)
            ledger = LedgerState(self.genesis_tx)
            voting = VotingView(tangle, ledger, self.table)
            for name in ("x", "y"):
                self._deliver_to((tangle, ledger, voting), self.spend_block[name], self.spend_tx[name], self.t0)
            self.views.append((tangle, ledger, voting))
        self.prefs = [self.spend_tx[p].id for p in self.initial]
        self.last = [None] * N
        self.last_tx = [None] * N
        self.round = 0

    def _deliver_to(self, view, block, tx, now) -> None:
        tangle, ledger, voting = view
        if tx.id not in ledger:
            ledger.apply(tx)
        out = tangle.receive_block(block, now)
        voting.observe(out.solidified)

    def preference_names(self) -> tuple:
        names = {self.spend_tx["x"].id: "x", self.spend_tx["y"].id: "y"}
        return tuple(names[p] for p in self.prefs)

    def _reselect(self, i: int, now: float) -> None:
        _, ledger, voting = self.views[i]
        graph = ledger.conflict_graph()
        r = select_reality(graph, conflict_weight_fn(voting), prefer={self.prefs[i]})
        (new,) = tuple(r)
        if new != self.prefs[i]:
            self.prefs[i] = new
            self.history.append((now, i, new))

    def play_round(self) -> tuple:
        """Issue one block per node, deliver every package, return the preferences afterwards."""
        r = self.round
        now = self.t0 + r * self.gamma
        issued = []
        for i in range(N):
            prev_out = OutputId(self.last_tx[i].id, 0) if self.last_tx[i] else OutputId(self.genesis_tx.id, i)
            tx = Transaction(_id("tx", r, i), (prev_out,), (Output(1.0, f"n{i}"),), now)
            pref_block = self.spend_block["x" if self.prefs[i] == self.spend_tx["x"].id else "y"]
            own = self.last[i].id if self.last[i] else self.genesis.id
            b = Block(_id("block", r, i), (tx_ref(pref_block.id), tx_ref(own)), tx.id, i, now)
            self._deliver_to(self.views[i], b, tx, now)
            issued.append((b, tx))
            self.last[i], self.last_tx[i] = b, tx
        queue = []
        for src, (b, tx) in enumerate(issued):
            for dst in range(N):
                if dst == src:
                    continue
                d = self.delay_fn(src, dst, r) if self.delay_fn else attack_delay(src, dst, self.delta, self.gamma)
                heapq.heappush(queue, (now + d, src, dst))
        while queue:
            at, src, dst = heapq.heappop(queue)
            b, tx = issued[src]
            self._deliver_to(self.views[dst], b, tx, at)
            self._reselect(dst, at)
        self.round += 1
        return self.preference_names()


def metastability_schedule_I(delta: float = 1.0, gamma: float = 2.0, rounds: int = 1, t0: float = 0.0,
                             n_nodes: int = N, weights=None) -> list[tuple]:
    """Preferences after each round under the attack schedule."""
    if n_nodes != N:
        raise WrongFixture("the schedule is defined for exactly 4 nodes")
    if weights is not None and len(set(weights)) != 1:
        raise WrongFixture("the schedule needs equal weights")
    fx = MetaFixture(delta, gamma, t0)
    return [fx.play_round() for _ in range(rounds)]


def random_delay_control(delta: float, gamma: float, seed: int, max_rounds: int = 50) -> tuple[int, tuple]:
    """Same fixture with independent uniform delays in [delta, gamma]; returns
    (rounds played, final preferences), stopping at the first agreement."""
    rng = np.random.default_rng(seed)
    fx = MetaFixture(delta, gamma, delay_fn=lambda s, d, r: float(rng.uniform(delta, gamma)))
    prefs = fx.preference_names()
    for r in range(1, max_rounds + 1):
        prefs = fx.play_round()
        if len(set(prefs)) == 1:
            return r, prefs
    return max_rounds, prefs
