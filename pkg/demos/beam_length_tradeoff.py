"""Released energy against torsion robustness over the admissible beam lengths."""

import numpy as np

from lamsa.config import default_config
from lamsa.geometry import beam_length_bounds
from lamsa.optimize import optimize_beam_length, torsion_effects

cfg = default_config()
lo, hi = beam_length_bounds(cfg.geometry())
print(f"admissible band ({lo:.2f}, {hi:.2f}) mm\n")

best, rows = optimize_beam_length(np.arange(38.0, 42.01, 1.0), cfg)
print(f"{'L mm':>6}{'trigger N':>11}{'output N':>10}{'energy mJ':>11}{'margin':>8}{'score':>8}")
for r in rows:
    print(f"{r['L']:6.1f}{r['trigger_force']:11.3f}{r['output_force']:10.3f}"
          f"{r['output_energy']:11.3f}{r['torsion_margin']:8.3f}{r['score']:8.3f}")
print(f"\nbest length {best:.1f} mm")

eff = torsion_effects(cfg, (38.0, 40.0, 42.0))
print("output-force change at 10 deg torsion:",
      ", ".join(f"{L:.0f} mm {v:+.2%}" for L, v in eff.items()))
