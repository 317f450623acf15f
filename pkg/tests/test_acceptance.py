"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The simulation criteria use the bundled presets with their full seed counts,
so this file takes a while (roughly 8 minutes on one core).  Skip it with
``-m "not slow"``.  ``OTVSIM_WORKERS`` is not consulted here; runs go in order.
"""

import math
import time

import pytest

from otvsim.analytics import LoadParams, confluence_time, expected_tip_pool, lambert_w, ode_confluence_oracle
from otvsim.cli import expand, read_raw, summarize
from otvsim.netsim import InfeasiblePartition, feasible_partition_sizes, from_dict, run
from otvsim.netsim.adversary import make_strategy
from otvsim.netsim.metastability import MetaFixture, metastability_schedule_I
from otvsim.toy import verify_toy

pytestmark = pytest.mark.slow


def preset_runs(name, seeds=None, **override):
    """``{label: [RunReport]}`` for a bundled preset, seeds ``seed .. seed+reps-1``."""
    out = {}
    for label, d in expand(read_raw(name)):
        cfg = from_dict({**d, **override})
        reps = seeds or cfg.replications
        out[label] = [run(from_dict({**cfg.to_dict(), "seed": cfg.seed + r})) for r in range(reps)]
    return out


# -- 1 --------------------------------------------------------------------------------------


def test_c01_toy_example(verdict):
    t = time.perf_counter()
    bad = verify_toy()
    dt = time.perf_counter() - t
    ok = not bad and dt < 1.0
    verdict(1, ok, f"toy tables, reality and revote deltas: {len(bad)} mismatches in {dt:.3f} s")
    assert ok, bad


# -- 2 --------------------------------------------------------------------------------------


def test_c02_tip_pool_law(verdict):
    runs = preset_runs("tip_pool")
    worst, parts = 0.0, []
    for label, reps in runs.items():
        cfg = reps[0].config
        want = expected_tip_pool(LoadParams(cfg["lam"], cfg["delay"]["h"], cfg["k"]))
        got = [r.tip_pool_mean for r in reps]
        dev = max(abs(g / want - 1) for g in got)
        worst = max(worst, dev)
        parts.append(f"{label} L0={want:.1f} mean={sum(got) / len(got):.2f}")
    ok = worst <= 0.20
    verdict(2, ok, f"{'; '.join(parts)}; worst seed off by {worst:.1%} (limit 20%)")
    assert ok


# -- 3, 4 -----------------------------------------------------------------------------------


def test_c03_confirmation_time_baseline(verdict):
    (reps,) = preset_runs("xi_baseline").values()
    med = summarize(reps)["confirmation"]["median"]
    ok = med is not None and med <= 2.0
    verdict(3, ok, f"N=100 baseline, {len(reps)} seeds: median TTC {med} s (limit 2 s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="issuance alone needs about 5.4 s at 100 blocks/s with Zipf(0.9) weights; "
                                       "see the decisions ledger")
def test_c04_confirmation_time_n1000(verdict):
    (reps,) = preset_runs("n1000_s09").values()
    med = summarize(reps)["confirmation"]["median"]
    ok = med is not None and 1.0 <= med <= 5.0
    verdict(4, ok, f"N=1000 s=0.9, {len(reps)} seeds: median TTC {med} s (band [1, 5] s)")
    assert ok


# -- 5, 6 -----------------------------------------------------------------------------------


def test_c05_bait_and_switch_phase_change(verdict):
    runs = preset_runs("bait_and_switch")
    rate = {float(label.split("=")[1]): summarize(reps)["consensus_rate"] for label, reps in runs.items()}
    low = all(r >= 0.9 for q, r in rate.items() if q <= 0.15)
    high = all(r < 1.0 for q, r in rate.items() if q >= 0.25)
    ok = low and high
    verdict(5, ok, "consensus rate " + ", ".join(f"q={q}: {r:.2f}" for q, r in sorted(rate.items())))
    assert ok


@pytest.mark.parametrize("preset", ["srrs_bait_and_switch", "srrs_metastability_ii", "srrs_safety_breaker"])
def test_c06_srrs_keeps_liveness_and_safety(preset, verdict, request):
    runs = preset_runs(preset)
    parts, ok = [], True
    for label, reps in runs.items():
        s = summarize(reps)
        ok &= s["consensus_rate"] == 1.0 and s["broken_safety_runs"] == 0
        parts.append(f"{label}: {s['consensus_rate']:.2f}/{s['broken_safety_runs']}")
    # the three strategies share one line; it stays FAIL once any of them fails
    prev = request.config.acceptance.get(6, "")
    ok_all = ok and "FAIL" not in prev
    detail = prev.split(": ", 1)[1].split("  ", 1)[1] + " | " if prev else ""
    verdict(6, ok_all, detail + f"{preset} (rate/broken) " + ", ".join(parts))
    assert ok


# -- 7 --------------------------------------------------------------------------------------


def test_c07_metastability_one(verdict):
    fx = MetaFixture(1.0, 2.0)
    first = fx.play_round()
    inverted = first == ("y", "y", "x", "x") and all(t <= 2.0 for t, _, _ in fx.history)
    rounds = metastability_schedule_I(1.0, 2.0, rounds=12)
    a, b = ("y", "y", "x", "x"), ("x", "x", "y", "y")
    held = sum(1 for r, p in enumerate(rounds) if p == (a if r % 2 == 0 else b))
    ok = inverted and held >= 10
    verdict(7, ok, f"inverted by t=gamma: {inverted}; split kept for {held} of 12 rounds")
    assert ok


# -- 8 --------------------------------------------------------------------------------------


def test_c08_safety_breaker(verdict):
    (reps,) = preset_runs("safety_breaker").values()
    broken = sum(r.broken_safety for r in reps)
    sizes = feasible_partition_sizes(0.1, 2 / 3, 100)
    with pytest.raises(InfeasiblePartition):
        make_strategy(from_dict({"adversary": {"kind": "safety_breaker", "q": 0.1}}))
    ok = broken >= 1 and sizes == []
    verdict(8, ok, f"q=0.2: broken safety in {broken} of {len(reps)} seeds; q=0.1 feasible sizes {sizes}")
    assert ok


# -- 9 --------------------------------------------------------------------------------------
# The property suites live next to the modules they test; here they are run
# again as a unit so the criterion has a single verdict.


def test_c09_oracle_equivalences(verdict):
    from test_reality import test_selectors_emit_realities
    from test_tangle import test_ww_monotone_and_growing
    from test_voting import test_incremental_matches_recompute

    done = []
    for fn in (test_incremental_matches_recompute, test_selectors_emit_realities, test_ww_monotone_and_growing):
        fn()
        done.append(fn.__name__)
    verdict(9, True, "500 incremental-vs-recompute, 300 brute-force MIS, 1000 WW lemma examples")


# -- 10 -------------------------------------------------------------------------------------


def test_c10_analytics(verdict):
    worst = 0.0
    for k in (2, 4, 8):
        for lh in (5, 10, 50):
            p = LoadParams(lam=lh / 0.1, h=0.1, k=k, eps=0.5)
            exact = confluence_time(p).exact
            worst = max(worst, abs(ode_confluence_oracle(p) / exact - 1))
    zs = [-1 / math.e + 1e-9, -0.2, 0.0, 0.5, 1.0, math.e, 10.0, 1e3, 1e6]
    lw = max(abs(lambert_w(z) * math.exp(lambert_w(z)) - z) / max(1.0, abs(z)) for z in zs)
    slack = math.inf
    for seed in range(3):
        rep = run(from_dict({"nodes": 100, "lam": 100.0, "horizon": 30.0, "ww_growth": True, "seed": seed}))
        for tau, mean, se, bound in rep.ww_growth:
            slack = min(slack, bound + 3 * se - mean)
    ok = worst <= 0.05 and lw <= 1e-10 and slack >= -1e-9
    verdict(10, ok, f"ODE vs closed form worst {worst:.2%}; Lambert residual {lw:.1e}; "
                    f"growth bound minus mean WW >= {slack:.3f}")
    assert ok
