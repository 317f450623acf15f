"""Walk through the seven-block example: witness and approval weights, the
preferred reality, and what happens when brown re-votes.

    python demos/toy_walkthrough.py
"""

from otvsim.toy import brown_revote, build_toy, toy_tables

toy = build_toy()
t = toy_tables(toy)
print(f"{'block':<6}{'WW':>6}{'AW':>6}")
for name in t["ww"]:
    print(f"{name:<6}{t['ww'][name]:>6.1f}{t['aw'][name]:>6.1f}")
print("reality:", sorted(t["reality"]))

brown_revote(toy)
after = toy_tables(toy)["aw"]
print(f"brown re-votes for w: AW(y) {t['aw']['y']:.1f} -> {after['y']:.1f}, "
      f"AW(x) {t['aw']['x']:.1f} -> {after['x']:.1f}")
