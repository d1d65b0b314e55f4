"""Planar-plus-yaw locomotion of the robot body under four fin chains.

Fins sit on a symmetric cross at ``arm`` from the body axis: fin 0 on +x,
fin 1 on +y, fin 2 on -x, fin 3 on -y.  Each chain's vertical thrust comes
from its own steady cycle.  A deflection beta tips that thrust about the
fin's spar: fins on the y axis (1, 3) tip it toward +x and fins on the x
axis (0, 2) toward +y.  Equal deflections on a pair therefore translate the
body, and opposite deflections on a pair turn it.

Translation uses world-frame quadratic drag per axis plus a constant
vertical buoyancy offset; yaw has its own quadratic damping.  Pitch is
reported as the tilt of the instantaneous net fin force and does not feed
back into the motion.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .actuator import run_cycle
from .errors import ConfigError, SimulationError

N_FINS = 4
# unit mount directions and thrust tilt directions in the body frame
MOUNTS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
TILT_AXES = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class RobotBody:
    mass: float = 350.0
    drag_Cd: float = 1.0
    ref_area: float = 7850.0
    buoyancy_offset: float = 0.0
    yaw_inertia: float = 1.0e6
    yaw_drag: float = 50.0
    arm: float = 60.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("body mass must be positive")
        if not (self.drag_Cd >= 0 and self.ref_area > 0 and self.yaw_inertia > 0):
            raise ConfigError("body drag, area and yaw inertia must be positive")
        if not self.arm > 0:
            raise ConfigError("fin arm must be positive")

    @property
    def mounts(self):
        return self.arm * MOUNTS


@dataclass
class RobotState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    yaw: float = 0.0
    yaw_rate: float = 0.0
    pitch: float = 0.0


@dataclass
class Trajectory:
    time: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    yaw: np.ndarray
    yaw_rate: np.ndarray
    pitch: np.ndarray
    phase: np.ndarray
    snap_time: float
    period: float
    n_cycles: int
    deflections: np.ndarray = field(repr=False, default=None)

    @property
    def x(self):
        return self.pos[:, 0]

    @property
    def y(self):
        return self.pos[:, 1]

    @property
    def z(self):
        return self.pos[:, 2]

    def state(self, i=-1):
        return RobotState(*self.pos[i], *self.vel[i], self.yaw[i], self.yaw_rate[i], self.pitch[i])


@dataclass(frozen=True)
class CycleSummary:
    index: int
    t_start: float
    rise: float
    dip: float
    net: float
    dx: float
    dy: float

    @property
    def horizontal(self):
        return float(np.hypot(self.dx, self.dy))


@njit(cache=True)
def _integrate_body(fb, tz, state, m, cda, buoy, I_z, c_yaw, dt, pos, vel, ang, pitch):
    """Semi-implicit Euler over body-frame fin forces ``fb`` (n, 3) in N."""
    x, y, z, vx, vy, vz, psi, r = (state[0], state[1], state[2], state[3], state[4],
                                   state[5], state[6], state[7])
    for i in range(fb.shape[0]):
        pos[i, 0] = x
        pos[i, 1] = y
        pos[i, 2] = z
        vel[i, 0] = vx
        vel[i, 1] = vy
        vel[i, 2] = vz
        ang[i, 0] = psi
        ang[i, 1] = r
        fx_b, fy_b, fz = fb[i, 0], fb[i, 1], fb[i, 2]
        if fx_b * fx_b + fz * fz > 1e-18:
            pitch[i] = np.arctan2(fx_b, fz)
        else:
            pitch[i] = 0.0
        c, s_ = np.cos(psi), np.sin(psi)
        fx = c * fx_b - s_ * fy_b
        fy = s_ * fx_b + c * fy_b
        # drag in N for v in mm/s, cda in m^2 times rho/2
        fx -= cda * vx * abs(vx) * 1e-6
        fy -= cda * vy * abs(vy) * 1e-6
        fz += buoy - cda * vz * abs(vz) * 1e-6
        vx += fx * 1e6 / m * dt
        vy += fy * 1e6 / m * dt
        vz += fz * 1e6 / m * dt
        x += vx * dt
        y += vy * dt
        z += vz * dt
        r += (tz[i] - c_yaw * r * abs(r)) * 1e6 / I_z * dt
        psi += r * dt
        if not (np.isfinite(z) and np.isfinite(vz) and np.isfinite(x) and np.isfinite(y)
                and np.isfinite(psi) and np.isfinite(r)):
            return i
    state[0], state[1], state[2], state[3] = x, y, z, vx
    state[4], state[5], state[6], state[7] = vy, vz, psi, r
    return -1


def _normalize_schedule(deflections, n_cycles):
    if deflections is None:
        return np.zeros((n_cycles, N_FINS))
    d = np.asarray(deflections, dtype=float)
    if d.ndim == 1:
        if d.size != N_FINS:
            raise ConfigError("a deflection set needs one angle per fin")
        d = np.tile(d, (n_cycles, 1))
    if d.shape != (n_cycles, N_FINS):
        raise ConfigError(f"deflection schedule must have shape ({n_cycles}, {N_FINS})")
    if np.any(np.abs(d) >= 90):
        raise ConfigError("deflection angles must lie in (-90, 90) degrees")
    return d


def fin_forces(trace, beta_deg, fin_index):
    """Body-frame force history (n, 3) of one fin from its cycle trace."""
    b = np.deg2rad(beta_deg)
    f = np.zeros((trace.thrust.size, 3))
    f[:, :2] = np.outer(trace.thrust * np.sin(b), TILT_AXES[fin_index])
    f[:, 2] = trace.thrust * np.cos(b)
    return f


def simulate_locomotion(n_cycles, deflections, config, dt=None, traces=None, thrust_off=False):
    """Integrate ``n_cycles`` crank revolutions of the robot body.

    ``deflections`` is None (all zero), four angles for every cycle, or an
    ``(n_cycles, 4)`` per-cycle schedule in degrees.
    """
    if n_cycles < 1:
        raise ConfigError("need at least one cycle")
    sched = _normalize_schedule(deflections, n_cycles)
    body = config.body()
    offsets = [config["drive"][f"phase_offset_fin{i}_deg"] for i in range(N_FINS)]
    cache = {} if traces is None else dict(traces)

    def trace_for(beta):
        key = round(float(beta), 9)
        if key not in cache:
            cache[key] = run_cycle(config, deflection=key, dt=dt)
        return cache[key]

    base = trace_for(0.0)
    n = base.time.size
    step = base.dt
    period = base.period
    fb = np.zeros((n_cycles * n, 3))
    tz = np.zeros(n_cycles * n)
    mounts = body.mounts
    for k in range(n_cycles):
        sl = slice(k * n, (k + 1) * n)
        for i in range(N_FINS):
            tr = trace_for(sched[k, i])
            f = fin_forces(tr, sched[k, i], i)
            if offsets[i]:
                f = np.roll(f, int(round(offsets[i] / 360.0 * n)), axis=0)
            if thrust_off:
                f = np.zeros_like(f)
            fb[sl] += f
            # z-torque from horizontal components at the mount point
            tz[sl] += mounts[i, 0] * f[:, 1] - mounts[i, 1] * f[:, 0]
    rho = config["fluid"]["density_kg_per_m3"]
    cda = 0.5 * rho * body.drag_Cd * body.ref_area * 1e-6
    state = np.zeros(8)
    total = n_cycles * n
    pos = np.empty((total, 3))
    vel = np.empty((total, 3))
    ang = np.empty((total, 2))
    pitch = np.empty(total)
    fail = _integrate_body(fb, tz, state, body.mass, cda, body.buoyancy_offset,
                           body.yaw_inertia, body.yaw_drag, step, pos, vel, ang, pitch)
    if fail >= 0:
        last = max(fail - 1, 0)
        raise SimulationError("body integration diverged", time=last * step,
                              z=float(pos[last, 2]), vz=float(vel[last, 2]))
    return Trajectory(
        time=np.arange(total) * step, pos=pos, vel=vel, yaw=np.rad2deg(ang[:, 0]),
        yaw_rate=np.rad2deg(ang[:, 1]), pitch=np.rad2deg(pitch),
        phase=np.tile(base.phase, n_cycles), snap_time=base.snap_time, period=period,
        n_cycles=n_cycles, deflections=sched,
    )


def per_cycle_summary(traj):
    """Snap-to-snap windows: rise, dip and net vertical travel per cycle.

    Returns ``(summaries, partial_excluded)``.
    """
    t, z = traj.time, traj.z
    t0 = traj.snap_time if np.isfinite(traj.snap_time) else 0.0
    dt = t[1] - t[0] if t.size > 1 else 0.0
    out = []
    k = 0
    while True:
        a = t0 + k * traj.period
        b = a + traj.period
        if b > t[-1] + 0.5 * dt:
            break
        i0 = int(np.searchsorted(t, a - 0.5 * dt))
        i1 = min(int(np.searchsorted(t, b - 0.5 * dt)), t.size - 1)
        seg = z[i0:i1 + 1]
        top = float(np.max(seg))
        rise = top - float(seg[0])
        dip = top - float(seg[-1])
        out.append(CycleSummary(k, float(t[i0]), rise, dip, rise - dip,
                                float(traj.x[i1] - traj.x[i0]), float(traj.y[i1] - traj.y[i0])))
        k += 1
    partial = t[-1] > t0 + k * traj.period + 0.5 * dt
    return out, bool(partial)


def steady_summary(traj):
    """Summary of the last complete cycle."""
    cycles, _ = per_cycle_summary(traj)
    if not cycles:
        raise SimulationError("trajectory shorter than one full cycle")
    return cycles[-1]


# steering scripts

def parse_steering(text):
    """Parse ``time_s, fin_id, beta_deg`` lines into sorted commands."""
    cmds = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.replace(",", " ").split()]
        if len(parts) != 3:
            raise ConfigError(f"expected 'time_s, fin_id, beta_deg', got {raw.strip()!r}", n)
        try:
            t, fid, beta = float(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ConfigError(f"malformed steering command {raw.strip()!r}", n) from None
        if t < 0 or not np.isfinite(t):
            raise ConfigError("command time must be non-negative", n)
        if fid not in range(N_FINS):
            raise ConfigError(f"fin id must be 0-3, got {fid}", n)
        if not -90 < beta < 90:
            raise ConfigError("deflection must lie in (-90, 90) degrees", n)
        key = (t, fid)
        if key in cmds and cmds[key][0] != beta:
            raise ConfigError(f"conflicting commands for fin {fid} at t={t} s "
                              f"(line {cmds[key][1]} and line {n})", n)
        cmds[key] = (beta, n)
    return sorted((t, fid, b) for (t, fid), (b, _) in cmds.items())


def schedule_from_commands(commands, n_cycles, period):
    """Commands take effect at the first cycle boundary at or after their time."""
    horizon = n_cycles * period
    sched = np.zeros((n_cycles, N_FINS))
    current = np.zeros(N_FINS)
    pending = sorted(commands)
    for t, _, _ in pending:
        if t > horizon:
            raise ConfigError(f"command at t={t} s lies beyond the {horizon:.3f} s horizon")
    j = 0
    for k in range(n_cycles):
        boundary = k * period
        while j < len(pending) and pending[j][0] <= boundary + 1e-12:
            current[pending[j][1]] = pending[j][2]
            j += 1
        sched[k] = current
    return sched


def mirror_commands(commands):
    """Reflect a script through the x-z plane (y -> -y)."""
    swap = {0: 0, 1: 3, 2: 2, 3: 1}
    out = []
    for t, fid, beta in commands:
        b = -beta if fid in (0, 2) else beta
        out.append((t, swap[fid], b))
    return sorted(out)


def steering_scenario(commands, config, duration=None, dt=None, traces=None):
    """Run a timed deflection script; ``duration`` defaults to the last command plus 10 s."""
    if isinstance(commands, str):
        commands = parse_steering(commands)
    period = config.period
    if duration is None:
        last = max((t for t, _, _ in commands), default=0.0)
        duration = last + 10.0
    n_cycles = max(1, int(np.ceil(duration / period - 1e-9)))
    sched = schedule_from_commands(commands, n_cycles, period)
    return simulate_locomotion(n_cycles, sched, config, dt=dt, traces=traces)


def yaw_torque_oracle(thrust, beta_deg, config):
    """Yaw torque (N mm) of a differential pair, +beta on fin 1 and -beta on fin 3."""
    a = config["body"]["arm_mm"]
    fx = thrust * np.sin(np.deg2rad(beta_deg))
    # fin 1 at (0, a) pushes +x, fin 3 at (0, -a) pushes -x
    return -a * fx - (-a) * (-fx)
