import pytest

from otvsim.netsim import InfeasiblePartition, feasible_partition_sizes, from_dict, run, simulate
from otvsim.netsim.adversary import BaitAndSwitch, MetastabilityII, NoAdversary, SafetyBreaker, make_strategy

SMALL = dict(nodes=20, lam=20.0, horizon=30.0, warmup=2.0, cooldown=4.0, topology={"neighbours": 4})


def cfg(**kw):
    return from_dict({**SMALL, **kw})


def test_partition_interval():
    # (theta - q)/(1 - q) * N < N* < 0.5/(1 - q) * N, i.e. 58.3 < N* < 62.5
    assert feasible_partition_sizes(0.2, 2 / 3, 100) == [59, 60, 61, 62]
    assert feasible_partition_sizes(0.1, 2 / 3, 100) == []
    assert feasible_partition_sizes(1 / 6, 2 / 3, 100) == []


def test_infeasible_partition_raises():
    with pytest.raises(InfeasiblePartition):
        make_strategy(from_dict({"adversary": {"kind": "safety_breaker", "q": 0.1}}))
    s = make_strategy(from_dict({"adversary": {"kind": "safety_breaker", "q": 0.1, "group_x": 55}}))
    assert s.size == 55


def test_make_strategy_kinds():
    assert isinstance(make_strategy(from_dict({})), NoAdversary)
    for kind, cls in [("bait_and_switch", BaitAndSwitch), ("metastability_ii", MetastabilityII),
                      ("safety_breaker", SafetyBreaker)]:
        assert isinstance(make_strategy(from_dict({"adversary": {"kind": kind, "q": 0.2}})), cls)


def test_adversary_weight_split():
    sim = simulate(cfg(horizon=6.0, adversary={"kind": "metastability_ii", "q": 0.3, "identities": 3, "start": 3.0}))
    assert sim.n_ident == 23
    assert sim.w[20:].tolist() == pytest.approx([0.1] * 3)
    assert sim.honest_weight == pytest.approx(0.7)


def test_bait_and_switch_keeps_minting():
    rep = run(cfg(seed=1, adversary={"kind": "bait_and_switch", "q": 0.3, "start": 3.0}))
    assert rep.adversary["minted"] > 2
    assert rep.consensus[0]["n_spends"] == rep.adversary["minted"]


def test_bait_and_switch_loses_to_small_q():
    reps = [run(cfg(seed=s, adversary={"kind": "bait_and_switch", "q": 0.05, "start": 3.0})) for s in range(3)]
    assert all(r.consensus_reached for r in reps)


def test_meta2_votes_lighter_side_only_until_muted():
    rep = run(cfg(seed=0, adversary={"kind": "metastability_ii", "q": 0.25, "start": 3.0, "mute_after": 8.0}))
    assert rep.adversary["emitted"] > 0
    assert rep.consensus_reached


def test_safety_breaker_breaks_safety_at_small_scale():
    # N_h = 20, q = 0.2: the only feasible X has 12 nodes
    reps = [run(cfg(seed=s, horizon=40.0, adversary={"kind": "safety_breaker", "q": 0.2, "start": 3.0}))
            for s in range(4)]
    assert all(r.adversary["group_x"] == 12 for r in reps)
    assert all(r.adversary["released_at"] is not None for r in reps)
    assert sum(r.broken_safety for r in reps) >= 2
    for r in reps:
        for ev in r.broken_safety_events:
            assert ev["spend_a"] != ev["spend_b"]


def test_srrs_keeps_safety_below_threshold():
    # q < min(1 - theta, theta - 1/2): no partition is feasible, so X is set by hand
    broken = 0
    for s in range(100):
        rep = run(cfg(seed=s, horizon=25.0, srrs={"enabled": True},
                      adversary={"kind": "safety_breaker", "q": 0.15, "start": 3.0, "group_x": 10}))
        broken += rep.broken_safety
    assert broken == 0
