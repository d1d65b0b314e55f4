"""Impulse and peak thrust against fin area, then the refined optimum."""

import numpy as np

from lamsa.config import default_config
from lamsa.hydro import fin_size_sweep
from lamsa.optimize import optimize_fin_area

cfg = default_config()
rows = fin_size_sweep(np.arange(1000.0, 4501.0, 500.0), cfg)
top = max(r.impulse for r in rows)
for r in rows:
    bar = "#" * int(round(40 * r.impulse / top))
    print(f"{r.area:6.0f} mm2  peak {r.peak_thrust:.3f} N  impulse {r.impulse:.5f} N s  {bar}")

best, _, warning = optimize_fin_area(1000.0, 4500.0, cfg)
print(f"\ngolden-section optimum: {best:.0f} mm2" + (f" ({warning})" if warning else ""))
