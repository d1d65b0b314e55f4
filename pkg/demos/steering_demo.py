"""The shipped steering script: translate, turn, then re-trim.

Prints the pose every few seconds.  Yaw grows only while the lateral pair
is deflected unequally.
"""

from importlib import resources

import numpy as np

from lamsa.body import parse_steering, steering_scenario
from lamsa.config import default_config

cfg = default_config()
text = resources.files("lamsa").joinpath("data/steering_default.txt").read_text()
cmds = parse_steering(text)
print("commands:", cmds)

traj = steering_scenario(cmds, cfg, duration=60.0)
print(f"\n{'t s':>6}{'x mm':>10}{'y mm':>10}{'z mm':>10}{'yaw deg':>10}")
for t in np.arange(0.0, traj.time[-1], 4.0):
    i = int(np.searchsorted(traj.time, t))
    print(f"{traj.time[i]:6.1f}{traj.x[i]:10.1f}{traj.y[i]:10.1f}{traj.z[i]:10.1f}{traj.yaw[i]:10.2f}")
