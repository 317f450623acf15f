"""Discrete-event simulation of honest nodes running On Tangle Voting.

Layout of the state, which keeps per-view work vectorized:

* every block gets an index; ``solid[b, i]`` is the time block ``b`` became
  solid at honest node ``i`` (inf if never) and ``tipend[b, i]`` the time its
  first child became solid there, so ``b`` is a tip at ``i`` on
  ``[solid, tipend)``.
* the solid row of a block is fixed when the block is issued: the block floods
  the honest graph (forward on first receipt) and becomes solid once it and
  its dependencies have arrived.  Dependencies are the parents plus the
  issuer's previous block, which is also the input of the issuer's next
  transaction.
* contested outputs and their spends are tracked by small integer indices.
  A block's voting candidates ``vcand[b]`` are the spends in its voting past
  cone.  Vote changes are pushed into per-view heaps keyed by the time they
  become solid there and applied lazily, in order, whenever a view is read.

The adversary is omniscient: it reads the issue-time (global) state.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..ids import coin_digest, digest64
from ..tipsel import restricted_draw
from ..weights import new_weight_table, zipf_weights
from .config import SimConfig
from .delay import DelayModel
from .topology import build_topology

AW_TOL = 1e-9
PRUNE_EVERY = 0.5


class HorizonTooShort(UserWarning):
    pass


@dataclass
class SpendInfo:
    output: int
    carrier: int  # block index
    digest: int
    issue_time: float
    issuer: int


class Simulation:
    def __init__(self, cfg: SimConfig):
        from .adversary import make_strategy

        self.cfg = cfg.validate()
        seeds = np.random.SeedSequence(cfg.seed).spawn(6)
        r_topo, self.r_issue, self.r_tip, r_delay, self.r_beacon, self.r_adv = [np.random.default_rng(s) for s in seeds]
        self.n_h = cfg.nodes
        self.k = cfg.k
        self.theta = cfg.theta
        self.horizon = cfg.horizon
        self.topo = build_topology(self.n_h, cfg.topology, r_topo)
        self.delay = DelayModel(cfg.delay, self.topo, r_delay)
        self.observers = sorted(r_topo.choice(self.n_h, size=min(cfg.observers, self.n_h), replace=False).tolist())

        self.strategy = make_strategy(cfg)
        n_a = self.strategy.n_identities
        q = cfg.adversary.q if n_a else 0.0
        honest = zipf_weights(self.n_h, cfg.zipf_s).as_array() * (1.0 - q)
        raw = list(honest) + [q / n_a] * n_a if n_a else list(honest)
        self.table = new_weight_table(raw)
        self.w = self.table.as_array()
        self.n_ident = len(self.w)
        self.honest_weight = float(self.w[: self.n_h].sum())
        self.fifo = np.ones(self.n_ident, dtype=bool)
        for j in self.strategy.non_fifo_identities(self.n_h):
            self.fifo[j] = False

        # block storage
        cap = int(cfg.lam * cfg.horizon * 1.3) + 256
        self.solid = np.full((cap, self.n_h), np.inf)
        self.tipend = np.full((cap, self.n_h), np.inf)
        self.issuer: list[int] = []
        self.issue_time: list[float] = []
        self.parents: list[tuple] = []  # ((idx, is_block_ref), ...)
        self.spend_of: list[int] = []
        self.vcand: list[frozenset] = []
        self.invalid: list[bool] = []
        self.init: list[tuple] = []  # first-hand arrivals: ((node, time), ...)
        self.n_blocks = 0

        # ledger side
        self.spends: list[SpendInfo] = []
        self.outputs: list[list[int]] = []  # output -> spend indices
        self.last_block = [-1] * self.n_ident
        self.last_filler = [-1] * self.n_ident
        self.exhausted_draws = 0
        self.fallback_refs = 0

        # votes: global (issue-time) and per view
        self.gvote: dict = {}
        self.g_aw: list[float] = []
        self.g_honest_aw: list[float] = []
        self.view_vote = [dict() for _ in range(self.n_h)]
        self.view_heap = [[] for _ in range(self.n_h)]
        # per view and spend: current AW, its high-water mark, first time >= theta
        self.aw = [[] for _ in range(self.n_h)]
        self.hw = [[] for _ in range(self.n_h)]
        self.conf = [[] for _ in range(self.n_h)]
        self._wl = self.w.tolist()
        self.block_events: dict = {}  # b -> [(j, o, s)] for re-pushing after a partition
        self._prev_block: dict = {}  # b -> issuer's previous block
        self._adv_chain: dict = {}  # (identity, chain) -> last block

        # tip bookkeeping
        self.active: list[int] = []
        self._active_arr = None
        self.global_tips: dict = {}  # insertion-ordered set
        self.reality = [frozenset() for _ in range(self.n_h)]

        # partitions
        self.hold = None
        self.extra = None
        self.partition_from: Optional[int] = None
        self.held_blocks: list[int] = []

        # SRRS
        self.srrs = cfg.srrs.enabled
        self.coin_log: list = []
        self.defections = 0

        self.samples: list = []
        self._queue: list = []
        self._seq = 0
        self.now = 0.0

        self._genesis()

    # -- event queue ----------------------------------------------------------------

    def schedule(self, t: float, fn, *args) -> None:
        if t <= self.horizon:
            heapq.heappush(self._queue, (t, self._seq, fn, args))
            self._seq += 1

    def run(self) -> "Simulation":
        cfg = self.cfg
        self.schedule(float(self.r_issue.exponential(1.0 / self._honest_rate())), self._honest_tick)
        self.schedule(PRUNE_EVERY, self._prune_tick)
        self.schedule(0.0, self._sample_tick)
        if self.srrs:
            self.schedule(cfg.srrs.epoch + cfg.srrs.d, self._epoch_tick, 1)
        if cfg.double_spend_at is not None:
            self.schedule(cfg.double_spend_at, self._honest_double_spend)
        self.strategy.setup(self)
        while self._queue:
            t, _, fn, args = heapq.heappop(self._queue)
            self.now = t
            fn(t, *args)
        self.now = self.horizon
        for i in range(self.n_h):
            self.advance_view(i, self.horizon)
        contested = [s for o in self.outputs if len(o) > 1 for s in o]
        if contested and all(self.conf[i][s] == math.inf for i in range(self.n_h) for s in contested):
            warnings.warn("no conflict was resolved before the horizon", HorizonTooShort, stacklevel=2)
        return self

    def _honest_rate(self) -> float:
        return self.cfg.lam * self.honest_weight

    def _honest_tick(self, t: float) -> None:
        i = int(self.r_issue.choice(self.n_h, p=self.w[: self.n_h] / self.honest_weight))
        self.honest_issue(i, t)
        self.schedule(t + float(self.r_issue.exponential(1.0 / self._honest_rate())), self._honest_tick)

    def _prune_tick(self, t: float) -> None:
        if self.active:
            arr = self._active()
            keep = self.tipend[arr].max(axis=1) > t
            if not keep.all():
                self.active = arr[keep].tolist()
                self._active_arr = None
        self.schedule(t + PRUNE_EVERY, self._prune_tick)

    def _sample_tick(self, t: float) -> None:
        self.samples.append((t, list(self.g_aw)))
        self.schedule(t + self.cfg.sample_dt, self._sample_tick)

    # -- storage helpers --------------------------------------------------------------

    def _grow(self) -> None:
        cap = self.solid.shape[0]
        pad = np.full((cap, self.n_h), np.inf)
        self.solid = np.vstack([self.solid, pad])
        self.tipend = np.vstack([self.tipend, pad.copy()])


    def _active(self) -> np.ndarray:
        if self._active_arr is None:
            self._active_arr = np.array(self.active, dtype=np.int64)
        return self._active_arr

    def _genesis(self) -> None:
        self.issuer.append(-1)
        self.issue_time.append(0.0)
        self.parents.append(())
        self.spend_of.append(-1)
        self.vcand.append(frozenset())
        self.invalid.append(False)
        self.init.append(())
        self.solid[0] = 0.0
        self.n_blocks = 1
        self.active.append(0)
        self.global_tips[0] = None

    def new_output(self) -> int:
        self.outputs.append([])
        return len(self.outputs) - 1

    def new_spend(self, output: int, issuer: int, t: float) -> int:
        s = len(self.spends)
        d = digest64(b"spend", self.cfg.seed.to_bytes(8, "big", signed=True), s.to_bytes(8, "big"))
        self.spends.append(SpendInfo(output, -1, d, t, issuer))
        self.outputs[output].append(s)
        self.g_aw.append(0.0)
        self.g_honest_aw.append(0.0)
        for i in range(self.n_h):
            self.aw[i].append(0.0)
            self.hw[i].append(0.0)
            self.conf[i].append(math.inf)
        return s

    def block_id(self, b: int) -> int:
        return digest64(b"block", self.cfg.seed.to_bytes(8, "big", signed=True), b.to_bytes(8, "big"))

    # -- conflicts and realities ------------------------------------------------------

    def known_conflicts(self, i: Optional[int], t: float) -> np.ndarray:
        """Boolean mask over spends: known at view ``i`` (or globally) and contested there."""
        n = len(self.spends)
        if n == 0:
            return np.zeros(0, dtype=bool)
        carriers = np.array([s.carrier for s in self.spends])
        out = np.array([s.output for s in self.spends])
        if i is None:
            known = np.ones(n, dtype=bool)
        else:
            # a spend whose carrier is still being built is not known anywhere yet
            known = (carriers >= 0) & (self.solid[np.maximum(carriers, 0), i] <= t)
        counts = np.bincount(out[known], minlength=len(self.outputs))
        return known & (counts[out] >= 2)

    def _cliques(self, mask) -> dict:
        by_out: dict = {}
        for s in np.flatnonzero(mask):
            by_out.setdefault(self.spends[s].output, []).append(int(s))
        return by_out

    def heaviest_reality(self, i: int, mask) -> frozenset:
        """Weight-greedy reality on the known Conflict Graph of view ``i``.

        Conflicts are flat (each a spend of a genesis output), so the greedy
        maximal independent set reduces to a per-output argmax with the same
        key as ``select_reality``: weight, then the current preference, then
        the smaller digest.
        """
        aw = self.aw[i]
        prefer = self.reality[i]
        chosen = []
        for spends in self._cliques(mask).values():
            chosen.append(max(spends, key=lambda s: (aw[s], s in prefer, -self.spends[s].digest)))
        return frozenset(chosen)

    def coin_reality(self, i: int, mask, x: float) -> frozenset:
        """``select_reality_with_coin`` on flat conflicts, one output at a time."""
        aw = self.aw[i]
        chosen = []
        for spends in self._cliques(mask).values():
            best = max(spends, key=lambda s: (aw[s], self.spends[s].digest))
            if aw[best] <= x:
                best = max(spends, key=lambda s: coin_digest(self.spends[s].digest, x))
            chosen.append(best)
        return frozenset(chosen)

    # -- per-view votes -------------------------------------------------------------

    def advance_view(self, i: int, t: float) -> None:
        heap = self.view_heap[i]
        if not heap or heap[0][0] > t:
            return
        votes = self.view_vote[i]
        aw, hw, conf = self.aw[i], self.hw[i], self.conf[i]
        w = self._wl
        bar = self.theta - AW_TOL
        while heap and heap[0][0] <= t:
            tau = heap[0][0]
            touched = []
            while heap and heap[0][0] == tau:
                _, _, j, o, s = heapq.heappop(heap)
                old = votes.get((j, o), -1)
                if old == s:
                    continue
                votes[(j, o)] = s
                aw[s] += w[j]
                if old >= 0:
                    aw[old] -= w[j]
                touched.append(s)
            for s in touched:
                a = aw[s]
                if a > hw[s]:
                    hw[s] = a
                    if a >= bar and conf[s] == math.inf:
                        conf[s] = tau

    def _push_votes(self, b: int, events, views=None) -> None:
        row = self.solid[b]
        idx = np.flatnonzero(np.isfinite(row)) if views is None else views
        for i in idx.tolist():
            heap = self.view_heap[i]
            ti = row[i]
            for j, o, s in events:
                heapq.heappush(heap, (ti, b, j, o, s))

    def _record_votes(self, b: int) -> None:
        """Global vote bookkeeping plus per-view events for a fresh valid block."""
        j = self.issuer[b]
        events = []
        for s in self.vcand[b]:
            o = self.spends[s].output
            old = self.gvote.get((j, o), -1)
            if old == s and self.fifo[j]:
                continue
            events.append((j, o, s))
            if old == s:
                continue
            self.gvote[(j, o)] = s
            self.g_aw[s] += self.w[j]
            if old >= 0:
                self.g_aw[old] -= self.w[j]
            if j < self.n_h:
                self.g_honest_aw[s] += self.w[j]
                if old >= 0:
                    self.g_honest_aw[old] -= self.w[j]
                self.defections += 1
        if events:
            self.block_events[b] = events
            self._push_votes(b, events)

    # -- block creation -------------------------------------------------------------

    def add_block(self, issuer: int, t: float, parents, spend: int = -1, deps=(), init=None) -> int:
        """Create a block; ``init`` lists first-hand arrivals ``(node, time)``
        (defaults to the honest issuer itself at ``t``)."""
        b = self.n_blocks
        if b >= self.solid.shape[0]:
            self._grow()
        self.n_blocks += 1
        parents = tuple(parents)
        if init is None:
            init = ((issuer, t),)
        vc = set()
        if spend >= 0:
            vc.add(spend)
            self.spends[spend].carrier = b
        for p, is_block in parents:
            if is_block:
                vc |= self.vcand[p]
            elif self.spend_of[p] >= 0:
                vc.add(self.spend_of[p])
        outs = [self.spends[s].output for s in vc]
        invalid = len(set(outs)) < len(outs)
        self.issuer.append(issuer)
        self.issue_time.append(t)
        self.parents.append(parents)
        self.spend_of.append(spend)
        self.vcand.append(frozenset(vc))
        self.invalid.append(invalid)
        self.init.append(tuple(init))

        self._solidify(b, deps)
        for p, _ in parents:
            np.minimum(self.tipend[p], self.solid[b], out=self.tipend[p])
            self.global_tips.pop(p, None)
        self.global_tips[b] = None
        self.active.append(b)
        self._active_arr = None
        if 0 <= issuer:
            self.last_block[issuer] = b
        if not invalid:
            self._record_votes(b)
        if self.partition_from is not None and not np.isfinite(self.solid[b]).all():
            self.held_blocks.append(b)
        return b

    def _deps_of(self, b: int, deps) -> list[int]:
        return [p for p, _ in self.parents[b]] + [d for d in deps if d >= 0]

    def _solidify(self, b: int, deps, hold=None) -> None:
        vec = np.full(self.n_h, np.inf)
        for node, at in self.init[b]:
            vec[node] = min(vec[node], at)
        arr = self.delay.arrivals(vec, self.hold if hold is None else hold, self.extra)
        d = self._deps_of(b, deps)
        D = self.solid[d].max(axis=0) if d else np.zeros(self.n_h)
        self.solid[b] = np.maximum(D, arr)

    # -- partitions -------------------------------------------------------------------

    def start_partition(self, group) -> None:
        """Hold every package crossing between ``group`` and the rest."""
        mask = np.zeros(self.n_h, dtype=bool)
        mask[list(group)] = True
        cross = mask[self.topo.src] != mask[self.topo.dst]
        self._cross = cross
        self.hold = np.where(cross, np.inf, 0.0)
        self.partition_from = self.n_blocks

    def slow_cross_edges(self, group, extra: float) -> None:
        mask = np.zeros(self.n_h, dtype=bool)
        mask[list(group)] = True
        cross = mask[self.topo.src] != mask[self.topo.dst]
        self.extra = np.where(cross, extra, 0.0)

    def release_partition(self, t: float) -> None:
        """Deliver everything held so far; packages leave the hold at ``t``."""
        if self.partition_from is None:
            return
        hold = np.where(self._cross, t, 0.0)
        for b in range(self.partition_from, self.n_blocks):
            old = self.solid[b].copy()
            deps = [self.last_block_before(b)]
            self._solidify(b, deps, hold=hold)
            self.solid[b] = np.minimum(self.solid[b], old)
            for p, _ in self.parents[b]:
                np.minimum(self.tipend[p], self.solid[b], out=self.tipend[p])
            fresh = np.flatnonzero(np.isinf(old) & np.isfinite(self.solid[b]))
            if len(fresh) and b in self.block_events:
                self._push_votes(b, self.block_events[b], views=fresh)
        self.hold = None
        self.partition_from = None
        self.held_blocks = []

    def last_block_before(self, b: int) -> int:
        """The issuer's block preceding ``b`` (its solidification dependency)."""
        return self._prev_block.get(b, -1)

    # -- honest behaviour -------------------------------------------------------------

    def reality_for(self, i: int, t: float, mask) -> frozenset:
        if self.srrs:
            return self.reality[i]
        r = self.heaviest_reality(i, mask)
        self.reality[i] = r
        return r

    def choose_refs(self, tips, mask, reality: frozenset, own_spend: int = -1):
        """R-URTS over ``tips`` plus explicit support for uncovered members of ``reality``."""
        spends = self.spends

        def cone_branch(tip):
            return frozenset(s for s in self.vcand[tip] if mask[s])

        def tx_branch(tip):
            s = self.spend_of[tip]
            return frozenset((s,)) if s >= 0 and mask[s] else frozenset()

        def clash(a, b):
            for x in a:
                ox = spends[x].output
                for y in b:
                    if x != y and spends[y].output == ox:
                        return True
            return False

        start = frozenset((own_spend,)) if own_spend >= 0 and mask[own_spend] else frozenset()
        m = len(reality)
        n_draw = max(1, self.k - m)
        blocks, txs, branch, exhausted = restricted_draw(
            tips, reality | start, n_draw, self.r_tip, cone_branch, tx_branch, clash, start=start)
        if exhausted:
            self.exhausted_draws += 1
        parents = [(p, True) for p in blocks] + [(p, False) for p in txs]
        for c in sorted(reality - branch):
            if spends[c].carrier >= 0 and mask[c] and not clash(branch, frozenset((c,))):
                parents.append((spends[c].carrier, False))
                branch = branch | {c}
        return parents

    def _tips_at(self, i: int, t: float) -> list[int]:
        arr = self._active()
        sel = (self.solid[arr, i] <= t) & (self.tipend[arr, i] > t)
        return arr[sel].tolist()

    def honest_issue(self, i: int, t: float, spend: int = -1) -> int:
        self.advance_view(i, t)
        mask = self.known_conflicts(i, t)
        reality = self.reality_for(i, t, mask)
        parents = self.choose_refs(self._tips_at(i, t), mask, reality, spend)
        if not parents:
            self.fallback_refs += 1
            last = self.last_block[i]
            parents = [(last if last >= 0 else 0, False)]
        if len(parents) == 1:
            parents = parents * 2
        prev = self.last_block[i]
        b = self.add_block(i, t, parents, spend, deps=(prev,))
        self._prev_block[b] = prev
        if spend < 0:
            self.last_filler[i] = b
        self.strategy.after_honest(self, b, t)
        return b

    def _honest_double_spend(self, t: float) -> None:
        a, b = self.r_adv.choice(self.n_h, size=2, replace=False).tolist()
        o = self.new_output()
        for i in (a, b):
            s = self.new_spend(o, i, t)
            self.honest_issue(i, t, spend=s)

    # -- adversary helpers -------------------------------------------------------------

    def adversary_issue(self, j: int, t: float, reality, entries, spend: int = -1, tips=None,
                        extra_parents=(), chain: Optional[str] = None) -> int:
        """Block by adversary identity ``j``: omniscient tip view unless ``tips`` given."""
        mask = self.known_conflicts(None, t)
        if tips is None:
            tips = list(self.global_tips)
        parents = list(extra_parents) + self.choose_refs(tips, mask, frozenset(reality), spend)
        if not parents:
            self.fallback_refs += 1
            last = self.last_block[j]
            parents = [(last if last >= 0 else 0, False)]
        if len(parents) == 1:
            parents = parents * 2
        key = (j, chain)
        prev = self._adv_chain.get(key, -1)
        entries = list(entries)
        delays = self.delay.sample(len(entries))
        init = tuple((e, t + float(dl)) for e, dl in zip(entries, delays))
        b = self.add_block(j, t, parents, spend, deps=(prev,), init=init)
        self._prev_block[b] = prev
        self._adv_chain[key] = b
        return b

    # -- SRRS ---------------------------------------------------------------------------

    def _epoch_tick(self, t: float, e: int) -> None:
        cfg = self.cfg.srrs
        boundary = e * cfg.epoch
        maturity = cfg.epoch if cfg.maturity is None else cfg.maturity
        x = float(self.r_beacon.uniform(0.5, self.theta))
        self.coin_log.append((e, x))
        for i in range(self.n_h):
            self.advance_view(i, t)
            xi = self.theta if cfg.eps > 0 and self.r_beacon.random() < cfg.eps else x
            mask = self.known_conflicts(i, t)
            mature = np.array([s.issue_time <= boundary - maturity for s in self.spends], dtype=bool)
            self.reality[i] = self.coin_reality(i, mask & mature if len(mask) else mask, xi)
        self.schedule((e + 1) * cfg.epoch + cfg.d, self._epoch_tick, e + 1)

    # -- summaries ------------------------------------------------------------------------

    def contested_outputs(self) -> list[int]:
        return [o for o, s in enumerate(self.outputs) if len(s) > 1]

    def creation_time(self, o: int) -> float:
        times = sorted(self.spends[s].issue_time for s in self.outputs[o])
        return times[1]


def simulate(cfg: SimConfig) -> Simulation:
    return Simulation(cfg).run()
