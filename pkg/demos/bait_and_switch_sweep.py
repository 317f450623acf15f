"""A small bait-and-switch sweep, with and without synchronized random reality
selection.  Scaled down (N=30, 25 s, 5 seeds) so it runs in well under a minute;
the bundled presets have the full-size version.

    python demos/bait_and_switch_sweep.py
"""

from otvsim.netsim import from_dict, run

BASE = dict(nodes=30, lam=30.0, horizon=25.0, topology={"neighbours": 6})

print(f"{'q':>5}{'srrs':>6}{'consensus':>11}{'broken':>8}")
for srrs in (False, True):
    for q in (0.05, 0.15, 0.25, 0.35):
        reps = [run(from_dict({**BASE, "seed": s, "srrs": {"enabled": srrs},
                               "adversary": {"kind": "bait_and_switch", "q": q, "start": 3.0}}))
                for s in range(5)]
        ok = sum(r.consensus_reached for r in reps)
        broken = sum(r.broken_safety for r in reps)
        print(f"{q:>5}{'on' if srrs else 'off':>6}{ok:>9}/5{broken:>8}")
