"""One crank revolution of a single beam-fin chain, phase by phase."""

import numpy as np

from lamsa.actuator import ActuatorPhase, run_cycle
from lamsa.config import default_config
from lamsa.hydro import cycle_impulse

cfg = default_config()
tr = run_cycle(cfg)

print(f"period {tr.period:.4f} s, snap at {tr.snap_time:.4f} s")
print(f"loading {tr.loading_duration * 1e3:.1f} ms, release {tr.release_duration * 1e3:.1f} ms, "
      f"ratio {tr.ratio:.2f}")
print(f"peak thrust {tr.thrust.max():.3f} N, impulse {cycle_impulse(tr):.4f} N s\n")

print(f"{'phase':<12}{'start s':>9}{'end s':>9}{'fin deg':>16}{'mean thrust N':>15}")
edges = np.flatnonzero(np.diff(tr.phase)) + 1
for a, b in zip(np.r_[0, edges], np.r_[edges, tr.phase.size]):
    sl = slice(a, b)
    print(f"{ActuatorPhase(int(tr.phase[a])).label:<12}{tr.time[a]:9.4f}{tr.time[b - 1]:9.4f}"
          f"{tr.fin_angle[a]:8.1f} ->{tr.fin_angle[b - 1]:6.1f}{tr.thrust[sl].mean():15.4f}")
