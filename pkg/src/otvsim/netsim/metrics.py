"""Run metrics: block confirmation times, consensus per contested output,
broken-safety events, tip-pool series and the WW growth check."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..analytics import ww_growth_bound
from ..weights import new_weight_table
from .engine import AW_TOL, Simulation

WW_GROWTH_TAUS = (0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0)


def _r(x: float, nd: int = 6) -> Optional[float]:
    """Round for the report; inf/nan become None so the JSON stays strict."""
    if x is None or not math.isfinite(x):
        return None
    return round(float(x), nd)


def _quantiles(xs) -> dict:
    xs = np.asarray(xs, dtype=float)
    fin = xs[np.isfinite(xs)]
    if len(fin) == 0:
        return {"n": int(len(xs)), "finite": 0, "median": None, "p10": None, "p90": None, "mean": None}
    return {
        "n": int(len(xs)),
        "finite": int(len(fin)),
        "median": _r(np.median(fin)),
        "p10": _r(np.percentile(fin, 10)),
        "p90": _r(np.percentile(fin, 90)),
        "mean": _r(fin.mean()),
    }


@dataclass
class ConsensusRecord:
    output: int
    creation: float
    n_spends: int
    consensus_time: Optional[float]  # None = not reached before the horizon
    winner: Optional[str]


@dataclass
class BrokenSafety:
    output: int
    node_a: int
    spend_a: str
    time_a: float
    node_b: int
    spend_b: str
    time_b: float


@dataclass
class RunReport:
    seed: int
    config: dict
    n_blocks: int
    confirmation: dict
    consensus: list
    consensus_time: Optional[float]
    broken_safety_events: list
    tip_pool_mean: Optional[float]
    tip_pool_series: list
    ww_growth: list
    orphaned_tx: int
    exhausted_draws: int
    fallback_refs: int
    max_branch_aw: Optional[float]
    adversary: dict
    coins: list
    confirmation_times: list = field(repr=False, default_factory=list)
    aw_series: list = field(repr=False, default_factory=list)

    @property
    def consensus_reached(self) -> bool:
        return self.consensus_time is not None

    @property
    def broken_safety(self) -> bool:
        return bool(self.broken_safety_events)

    def to_dict(self, full: bool = False) -> dict:
        d = asdict(self)
        if not full:
            d.pop("confirmation_times")
            d.pop("aw_series")
        return d

    def to_json(self, full: bool = False) -> str:
        return json.dumps(self.to_dict(full), sort_keys=True, allow_nan=False, indent=1)

    def metrics_csv(self) -> str:
        n_sp = max((len(a) for _, a in self.aw_series), default=0)
        pools = dict(self.tip_pool_series)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "tip_pool"] + [f"aw_{s}" for s in range(n_sp)])
        for t, aw in self.aw_series:
            row = [f"{t:.3f}", "" if pools.get(t) is None else f"{pools[t]:.3f}"]
            row += [f"{a:.6f}" for a in aw] + [""] * (n_sp - len(aw))
            w.writerow(row)
        return buf.getvalue()


# -- block confirmation ---------------------------------------------------------


def first_witness_times(sim: Simulation, observer: Optional[int]) -> np.ndarray:
    """F[x, j]: first time the observer sees a block by ``j`` in x's future cone
    (x included).  ``observer=None`` uses issue times, i.e. the omniscient view."""
    n = sim.n_blocks
    F = np.full((n, sim.n_ident), np.inf)
    when = np.asarray(sim.issue_time) if observer is None else sim.solid[:n, observer]
    for x in range(n - 1, 0, -1):
        j = sim.issuer[x]
        if when[x] < F[x, j]:
            F[x, j] = when[x]
        fx = F[x]
        for p, _ in sim.parents[x]:
            np.minimum(F[p], fx, out=F[p])
    return F


def crossing_times(F: np.ndarray, w: np.ndarray, theta: float) -> np.ndarray:
    """Per row, the first time the weight of columns with F <= t reaches theta."""
    order = np.argsort(F, axis=1, kind="stable")
    sorted_f = np.take_along_axis(F, order, axis=1)
    cw = np.cumsum(w[order], axis=1)
    hit = cw >= theta - AW_TOL
    idx = hit.argmax(axis=1)
    out = sorted_f[np.arange(len(F)), idx]
    out[~hit.any(axis=1)] = np.inf
    return out


def block_confirmation_times(sim: Simulation, observer: int) -> np.ndarray:
    """TTC per sampled block at ``observer``: first time WW >= theta minus its solidification time."""
    cfg = sim.cfg
    F = first_witness_times(sim, observer)
    issue = np.asarray(sim.issue_time)
    sel = np.flatnonzero((issue >= cfg.warmup) & (issue <= cfg.horizon - cfg.cooldown))
    sel = sel[sel > 0]
    sel = sel[np.isfinite(sim.solid[sel, observer])]
    t = crossing_times(F[sel], sim.w, sim.theta)
    return t - sim.solid[sel, observer]


# -- tips ----------------------------------------------------------------------------


def tip_pool_counts(sim: Simulation, observer: int, times) -> np.ndarray:
    n = sim.n_blocks
    s = np.sort(sim.solid[:n, observer])
    e = np.sort(sim.tipend[:n, observer])
    times = np.asarray(times)
    return np.searchsorted(s, times, side="right") - np.searchsorted(e, times, side="right")


def tip_pool_series(sim: Simulation) -> list:
    times = np.array([t for t, _ in sim.samples])
    if len(times) == 0:
        return []
    counts = np.mean([tip_pool_counts(sim, i, times) for i in sim.observers], axis=0)
    return [(float(t), float(c)) for t, c in zip(times, counts)]


def orphaned_blocks(sim: Simulation) -> int:
    """Blocks issued before the cooldown window that no honest node ever saw referenced."""
    issue = np.asarray(sim.issue_time)
    old = np.flatnonzero((issue <= sim.horizon - sim.cfg.cooldown))
    old = old[old > 0]
    return int(np.isinf(sim.tipend[old].min(axis=1)).sum())


# -- WW growth ------------------------------------------------------------------------


def ww_growth_check(sim: Simulation, taus=WW_GROWTH_TAUS) -> list:
    """Omniscient WW of sampled blocks ``tau`` after issuance, excluding the block
    itself, against the growth bound.  Returns ``(tau, mean, stderr, bound)``."""
    n = sim.n_blocks
    issue = np.asarray(sim.issue_time)
    H = np.full((n, sim.n_ident), np.inf)  # children only
    for x in range(n - 1, 0, -1):
        ex = H[x].copy()
        j = sim.issuer[x]
        ex[j] = min(ex[j], issue[x])
        for p, _ in sim.parents[x]:
            np.minimum(H[p], ex, out=H[p])
    cfg = sim.cfg
    tmax = max(taus)
    sel = np.flatnonzero((issue >= cfg.warmup) & (issue <= cfg.horizon - cfg.cooldown - tmax))
    sel = sel[sel > 0]
    honest_table = new_weight_table(sim.w[: sim.n_h])
    out = []
    for tau in taus:
        seen = H[sel] <= (issue[sel] + tau)[:, None]
        ww = seen.astype(float) @ sim.w
        se = float(ww.std(ddof=1) / math.sqrt(len(ww))) if len(ww) > 1 else 0.0
        bound = ww_growth_bound(tau, honest_table, cfg.lam * sim.honest_weight)
        out.append((tau, _r(ww.mean()), _r(se), _r(bound)))
    return out


# -- consensus -------------------------------------------------------------------------


def consensus_records(sim: Simulation) -> tuple[list, list]:
    records, broken = [], []
    for o in sim.contested_outputs():
        spends = sim.outputs[o]
        created = sim.creation_time(o)
        conf = np.array(sim.conf)[:, spends].reshape(sim.n_h, len(spends))  # views x spends
        everyone = conf.max(axis=0)
        best = int(np.argmin(everyone))
        ct = everyone[best] - created if np.isfinite(everyone[best]) else math.inf
        winner = f"{sim.spends[spends[best]].digest:016x}" if math.isfinite(ct) else None
        records.append(ConsensusRecord(o, _r(created), len(spends), _r(ct), winner))
        # broken safety: two honest nodes confirming different spends of this output
        first = []
        for col, s in enumerate(spends):
            fin = np.flatnonzero(np.isfinite(conf[:, col]))
            if len(fin):
                i = int(fin[np.argmin(conf[fin, col])])
                first.append((float(conf[i, col]), i, s))
        first.sort()
        if len(first) >= 2:
            (ta, a, sa), (tb, b, sb) = first[0], first[1]
            broken.append(BrokenSafety(o, a, f"{sim.spends[sa].digest:016x}", _r(ta),
                                       b, f"{sim.spends[sb].digest:016x}", _r(tb)))
    return records, broken


def collect_metrics(sim: Simulation) -> RunReport:
    cfg = sim.cfg
    ttc = np.concatenate([block_confirmation_times(sim, i) for i in sim.observers]) if sim.observers else np.array([])
    records, broken = consensus_records(sim)
    if records:
        cts = [r.consensus_time for r in records]
        consensus_time = None if any(c is None for c in cts) else max(cts)
    else:
        consensus_time = 0.0  # nothing to agree on
    pool = tip_pool_series(sim)
    steady = [c for t, c in pool if t >= cfg.warmup]
    aw_series = [(round(t, 6), [round(a, 9) for a in aw]) for t, aw in sim.samples]
    max_aw = max((max(aw) for _, aw in aw_series if aw), default=None)
    return RunReport(
        seed=cfg.seed,
        config=cfg.to_dict(),
        n_blocks=sim.n_blocks,
        confirmation=_quantiles(ttc),
        consensus=[asdict(r) for r in records],
        consensus_time=consensus_time,
        broken_safety_events=[asdict(b) for b in broken],
        tip_pool_mean=_r(np.mean(steady)) if steady else None,
        tip_pool_series=[(_r(t, 3), _r(c, 3)) for t, c in pool],
        ww_growth=ww_growth_check(sim) if cfg.ww_growth else [],
        orphaned_tx=orphaned_blocks(sim),
        exhausted_draws=sim.exhausted_draws,
        fallback_refs=sim.fallback_refs,
        max_branch_aw=_r(max_aw) if max_aw is not None else None,
        adversary=sim.strategy.summary(),
        coins=[(e, _r(x)) for e, x in sim.coin_log],
        confirmation_times=[float(x) if math.isfinite(x) else None for x in ttc],
        aw_series=aw_series,
    )
