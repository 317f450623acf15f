"""Adversary strategies.  Each one reads the global (issue-time) state of the
simulation and acts through ``Simulation.adversary_issue``; none of them can
rewrite honest views."""

from __future__ import annotations

import math

from .config import SimConfig
from .topology import connected_group

ENTRY_POINTS = 8
CHECK_EVERY = 0.1  # how often the safety breaker polls the honest views


class InfeasiblePartition(ValueError):
    pass


class Strategy:
    n_identities = 0

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.a = cfg.adversary

    def non_fifo_identities(self, n_h: int):
        return ()

    def at(self, sim, t: float, fn) -> None:
        sim.schedule(t, lambda now: fn(sim, now))

    def setup(self, sim) -> None:
        pass

    def after_honest(self, sim, b: int, t: float) -> None:
        pass

    def summary(self) -> dict:
        return {}


class NoAdversary(Strategy):
    pass


def _entries(sim, n: int = ENTRY_POINTS) -> list[int]:
    return sorted(sim.r_adv.choice(sim.n_h, size=min(n, sim.n_h), replace=False).tolist())


class BaitAndSwitch(Strategy):
    """Keeps minting fresh spends of one output and always votes the newest.

    A new spend is minted as soon as the honest weight behind the current one
    reaches ``alpha * q``, i.e. before the honest majority can settle on it.
    """

    n_identities = 1

    def setup(self, sim) -> None:
        self.j = sim.n_h
        self.entries = _entries(sim)
        self.output = sim.new_output()
        self.current = -1
        self.minted = 0
        self.at(sim, self.a.start, self._start)

    def _mint(self, sim, t: float) -> None:
        s = sim.new_spend(self.output, self.j, t)
        sim.adversary_issue(self.j, t, {s}, self.entries, spend=s)
        self.current = s
        self.minted += 1

    def _start(self, sim, t: float) -> None:
        self._mint(sim, t)
        self._mint(sim, t)
        self.at(sim, t + self._gap(sim), self._filler)

    def _gap(self, sim) -> float:
        return float(sim.r_adv.exponential(1.0 / (sim.cfg.lam * self.a.q)))

    def _filler(self, sim, t: float) -> None:
        sim.adversary_issue(self.j, t, {self.current}, self.entries, chain="filler")
        self.at(sim, t + self._gap(sim), self._filler)

    def after_honest(self, sim, b: int, t: float) -> None:
        if self.current >= 0 and sim.g_honest_aw[self.current] >= self.a.alpha * self.a.q:
            self._mint(sim, t)

    def summary(self) -> dict:
        return {"minted": self.minted}


class MetastabilityII(Strategy):
    """Several identities that always vote for the currently lighter spend."""

    def __init__(self, cfg):
        super().__init__(cfg)
        self.n_identities = cfg.adversary.identities

    def setup(self, sim) -> None:
        self.ids = list(range(sim.n_h, sim.n_h + self.n_identities))
        self.entries = {j: _entries(sim) for j in self.ids}
        self.output = sim.new_output()
        self.spends = []
        self.emitted = 0
        self.last_seen = 0
        self.at(sim, self.a.start, self._start)

    def _start(self, sim, t: float) -> None:
        for j in self.ids[:2]:
            s = sim.new_spend(self.output, j, t)
            sim.adversary_issue(j, t, {s}, self.entries[j], spend=s)
            self.spends.append(s)
        self._react(sim, t)
        if self.a.trigger == "timer":
            self.at(sim, t + self.a.timer, self._timer)

    def _muted(self, t: float) -> bool:
        return self.a.mute_after is not None and t >= self.a.mute_after

    def _lighter(self, sim) -> int:
        # ties keep the adversary where it is: prefer the lower digest
        return min(self.spends, key=lambda s: (sim.g_honest_aw[s], sim.spends[s].digest))

    def _react(self, sim, t: float) -> None:
        if not self.spends or self._muted(t):
            return
        target = self._lighter(sim)
        for j in self.ids:
            if sim.gvote.get((j, self.output), -1) != target:
                sim.adversary_issue(j, t, {target}, self.entries[j])
                self.emitted += 1

    def after_honest(self, sim, b: int, t: float) -> None:
        if self.a.trigger != "defection":
            return
        # fire only when an honest vote actually moved
        if sim.defections != self.last_seen:
            self.last_seen = sim.defections
            self._react(sim, t)

    def _timer(self, sim, t: float) -> None:
        self._react(sim, t)
        if not self._muted(t):
            self.at(sim, t + self.a.timer, self._timer)

    def summary(self) -> dict:
        return {"emitted": self.emitted}


def feasible_partition_sizes(q: float, theta: float, n_h: int) -> list[int]:
    """Sizes N* of the group X with (theta - q)/(1 - q) < N*/N_h < 0.5/(1 - q).

    The lower end lets X (plus the adversary) confirm x on its own; the upper
    end keeps X lighter than Y plus the adversary once everything is merged.
    """
    lo = (theta - q) / (1.0 - q) * n_h
    hi = 0.5 / (1.0 - q) * n_h
    return [n for n in range(max(1, math.floor(lo) + 1), min(n_h, math.ceil(hi))) if lo < n < hi]


class SafetyBreaker(Strategy):
    """Split the honest nodes into X and Y, show x only to X and y only to Y,
    wait until X confirms x and Y backs y, then merge the views with the
    adversary's weight on y."""

    n_identities = 1

    def non_fifo_identities(self, n_h: int):
        return (n_h,)

    def __init__(self, cfg):
        super().__init__(cfg)
        self.size = cfg.adversary.group_x
        if self.size is None:
            sizes = feasible_partition_sizes(cfg.adversary.q, cfg.theta, cfg.nodes)
            if not sizes:
                raise InfeasiblePartition(
                    f"no group size satisfies the split for q={cfg.adversary.q}, theta={cfg.theta}")
            self.size = max(sizes)
        # under SRRS delivery is bounded by d, so the adversary can hold packages at most that long
        self.max_hold = cfg.adversary.max_hold
        if self.max_hold is None and cfg.srrs.enabled:
            self.max_hold = cfg.srrs.d
        self.released_at = None
        self.x_confirmed_at = None

    def setup(self, sim) -> None:
        self.j = sim.n_h
        self.at(sim, self.a.start, self._start)

    def _start(self, sim, t: float) -> None:
        self.X = connected_group(sim.topo, self.size, sim.r_adv)
        xs = set(self.X)
        self.Y = [i for i in range(sim.n_h) if i not in xs]
        if self.max_hold is None:
            sim.start_partition(self.X)
        else:
            sim.slow_cross_edges(self.X, self.max_hold)
        o = sim.new_output()
        self.x = sim.new_spend(o, self.j, t)
        sim.adversary_issue(self.j, t, {self.x}, self.X, spend=self.x, tips=sim._tips_at(self.X[0], t), chain="x")
        self.y = sim.new_spend(o, self.j, t)
        rep = self.Y[0] if self.Y else self.X[0]
        sim.adversary_issue(self.j, t, {self.y}, self.Y, spend=self.y, tips=sim._tips_at(rep, t), chain="y")
        self.started = t
        self.checks = 1
        self.at(sim, t + CHECK_EVERY, self._check)

    def _ready(self, sim, t: float) -> bool:
        for i in self.X:
            sim.advance_view(i, t)
        if not all(math.isfinite(sim.conf[i][self.x]) for i in self.X):
            return False
        if self.x_confirmed_at is None:
            self.x_confirmed_at = t
        o = sim.spends[self.y].output
        return all(sim.gvote.get((i, o)) == self.y for i in self.Y)

    def _check(self, sim, t: float) -> None:
        if self._ready(sim, t) or t - self.started >= self.a.confirm_wait:
            self._release(sim, t)
        else:
            self.checks += 1
            self.at(sim, self.started + self.checks * CHECK_EVERY, self._check)

    def _release(self, sim, t: float) -> None:
        sim.release_partition(t)
        self.released_at = t
        # one block that block-references y's side and only tx-references x's side
        rep = self.Y[0] if self.Y else self.X[0]
        y_tips = [b for b in sim._tips_at(rep, t) if self.y in sim.vcand[b] and not sim.invalid[b]]
        x_tips = sim._tips_at(self.X[0], t)
        extra = []
        if y_tips:
            extra.append((y_tips[0], True))
        if x_tips:
            extra.append((x_tips[0], False))
        sim.adversary_issue(self.j, t, {self.y}, range(sim.n_h), tips=[], extra_parents=extra, chain="b")

    def summary(self) -> dict:
        return {"group_x": self.size, "released_at": self.released_at, "x_confirmed_at": self.x_confirmed_at}


def make_strategy(cfg: SimConfig) -> Strategy:
    kind = cfg.adversary.kind
    if kind == "none":
        return NoAdversary(cfg)
    if kind == "bait_and_switch":
        return BaitAndSwitch(cfg)
    if kind == "metastability_ii":
        return MetastabilityII(cfg)
    if kind == "safety_breaker":
        return SafetyBreaker(cfg)
    raise ValueError(kind)
