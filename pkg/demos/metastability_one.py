"""Four honest nodes, one double spend, and a delay schedule that flips every
opinion each round.  Then the same nodes with random delays.

    python demos/metastability_one.py
"""

from otvsim.netsim.metastability import metastability_schedule_I, random_delay_control

for r, prefs in enumerate(metastability_schedule_I(delta=1.0, gamma=2.0, rounds=8)):
    print(f"round {r}: {' '.join(prefs)}")

agreed = 0
for seed in range(20):
    rounds, prefs = random_delay_control(1.0, 2.0, seed)
    agreed += len(set(prefs)) == 1
print(f"random delays: {agreed} of 20 seeds reach agreement within 50 rounds")
