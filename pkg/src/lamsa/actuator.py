"""One actuation cycle of a beam-fin chain.

The slider height follows the crank.  Two mechanical coordinates are
integrated with semi-implicit Euler: the strip's modal coordinate ``q``
(with a small effective mass) and the fin angle.  They are joined by the
silicone connector, a rotational spring between the strip's end angle
``asin(q / lever)`` and the fin.  The latch is a penalty contact that pushes
the strip toward the released well once the slider passes the latch height,
and only while the strip sits in the loaded well.  The limited block is a
wall that sweeps the strip back into the loaded well as the slider returns
to BDC.

The snap instant is located on the quasi-static schedule: it is the time at
which the latch force first exceeds the barrier's trigger force, refined by
bisection on the continuous crank motion.
"""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from numba import njit

from . import beam as bm
from .errors import SimulationError
from .geometry import joint_distance, slider_height
from .hydro import (FORCE_SCALE, added_mass_force_coeff, drag_torque_coeff, fin_inertia,
                    normal_force_coeff)

# N -> g mm/s^2, and N mm -> g mm^2/s^2
ACC = 1e6

# strip must reach this share of its new well for the release to count
RELEASE_FRACTION = 0.8


class ActuatorPhase(IntEnum):
    PREPARATION = 0
    LOADING = 1
    ULTIMATE = 2
    RELEASE = 3
    RECOVERY = 4

    @property
    def label(self):
        return self.name.capitalize()


# indices into the kernel parameter vector
(P_KB, P_MB, P_CQ, P_LEVER, P_KC, P_CC, P_IF, P_DH, P_SL, P_KL, P_EPS,
 P_SBLK, P_SZERO, P_QWBLK, P_KW, P_LATCH, P_BLOCK) = range(17)
N_PARAMS = 17


@njit(cache=True)
def _step(q, v, th, om, s, qb, p, dt):
    """Advance one step; returns the new state, loads and a status code."""
    lever = p[P_LEVER]
    if not abs(q) < lever:
        return q, v, th, om, 0.0, 0.0, 0.0, 1
    if qb > 0.0:
        fb = -p[P_KB] * q * (q * q - qb * qb) / (qb * qb)
    else:
        fb = -p[P_KB] * q
    fl = 0.0
    if p[P_LATCH] > 0.0 and s > p[P_SL]:
        fl = p[P_KL] * (s - p[P_SL]) * 0.5 * (1.0 - np.tanh(q / p[P_EPS]))
    fw = 0.0
    if p[P_BLOCK] > 0.0 and s < p[P_SBLK]:
        qw = p[P_QWBLK] * (s - p[P_SZERO]) / (p[P_SBLK] - p[P_SZERO])
        if q > qw:
            fw = -p[P_KW] * (q - qw)
    root = np.sqrt(lever * lever - q * q)
    tau = p[P_KC] * (np.arcsin(q / lever) - th)
    fq = fb + fl + fw - tau / root - p[P_CQ] * v
    v = v + fq * ACC / p[P_MB] * dt
    q = q + v * dt
    om = om + (tau - p[P_CC] * om - p[P_DH] * om * abs(om)) * ACC / p[P_IF] * dt
    th = th + om * dt
    status = 0
    if not (np.isfinite(q) and np.isfinite(v) and np.isfinite(th) and np.isfinite(om)):
        status = 2
    return q, v, th, om, fl, fw, tau, status


@njit(cache=True)
def _integrate(s, qbar, state, p, dt, out):
    q, v, th, om = state[0], state[1], state[2], state[3]
    for i in range(s.size):
        out[i, 0] = q
        out[i, 1] = v
        out[i, 2] = th
        out[i, 3] = om
        om0 = om
        q, v, th, om, fl, fw, tau, status = _step(q, v, th, om, s[i], qbar[i], p, dt)
        out[i, 4] = fl
        out[i, 5] = fw
        out[i, 6] = tau
        out[i, 7] = (om - om0) / dt
        if status != 0:
            return i, status
    state[0], state[1], state[2], state[3] = q, v, th, om
    return s.size, 0


@dataclass(frozen=True)
class Chain:
    """Everything one beam-fin chain needs, resolved from a scenario."""

    geom: object
    beam: object
    fin: object
    fluid: object
    phi: float
    params: np.ndarray
    period: float
    dt: float
    snap_tol: float
    warmup: int
    prep_height: float
    K_thrust: float
    A_thrust: float


def build_chain(config, deflection=None, area=None, dt=None):
    geom = config.geometry()
    spec = config.beam()
    fin = config.fin(deflection)
    if area is not None:
        fin = fin.with_area(area)
    fluid = config.fluid()
    phi = config["fin"]["gear_gain"] * fin.deflection_beta
    g, b, c, d = config["geometry"], config["beam"], config["connector"], config["drive"]
    s_blk = g["block_start_fraction"] * geom.H
    s_zero = g["block_zero_fraction"] * geom.H
    p = np.zeros(N_PARAMS)
    p[P_KB] = spec.k_b
    p[P_MB] = b["modal_mass_g"]
    p[P_CQ] = b["damping_ns_per_mm"]
    p[P_LEVER] = c["lever_mm"]
    p[P_KC] = c["stiffness_nmm_per_rad"]
    p[P_CC] = c["damping_nmms_per_rad"]
    p[P_IF] = fin_inertia(fin, fluid)
    # torque coefficient in N mm s^2
    p[P_DH] = drag_torque_coeff(fin, fluid) * FORCE_SCALE
    p[P_SL] = geom.latch_height
    p[P_KL] = d["latch_stiffness_n_per_mm"]
    p[P_EPS] = d["latch_contact_width_mm"]
    p[P_SBLK] = s_blk
    p[P_SZERO] = s_zero
    p[P_QWBLK] = bm.well_amplitude(spec.L - joint_distance(s_blk, geom), spec, phi)
    p[P_KW] = d["block_stiffness_n_per_mm"]
    p[P_LATCH] = 1.0 if geom.latch_fraction < 1.0 else 0.0
    p[P_BLOCK] = 1.0 if geom.limited_block else 0.0
    return Chain(
        geom=geom, beam=spec, fin=fin, fluid=fluid, phi=float(phi), params=p,
        period=config.period, dt=float(dt or config["sim"]["dt_s"]),
        snap_tol=config["sim"]["snap_tolerance_s"], warmup=d["warmup_cycles"],
        prep_height=g["preparation_fraction"] * geom.H,
        K_thrust=normal_force_coeff(fin, fluid),
        A_thrust=added_mass_force_coeff(fin, fluid),
    )


def slider_schedule(t, chain):
    return slider_height(np.pi + 2.0 * np.pi * np.asarray(t) / chain.period, chain.geom)


def _qbar_of_s(s, chain):
    delta = chain.beam.L - joint_distance(s, chain.geom)
    return bm.well_amplitude(delta, chain.beam, chain.phi)


def stability_limit(chain, qbar_max):
    """Largest dt the explicit update tolerates for this chain."""
    p = chain.params
    lever = p[P_LEVER]
    qm = min(1.5 * qbar_max, 0.95 * lever)
    k_beam = 5.75 * p[P_KB] + p[P_KW] * p[P_BLOCK]
    k_beam += p[P_KL] * (chain.geom.H - p[P_SL]) / (2.0 * p[P_EPS]) * p[P_LATCH]
    k_beam += p[P_KC] / (lever * lever - qm * qm)
    w_beam = np.sqrt(k_beam * ACC / p[P_MB])
    w_fin = np.sqrt(p[P_KC] * ACC / p[P_IF])
    lim = 2.0 / max(w_beam, w_fin)
    lim = min(lim, 2.0 * p[P_MB] / (p[P_CQ] * ACC + 1e-300))
    lim = min(lim, 2.0 * p[P_IF] / (p[P_CC] * ACC + 1e-300))
    return float(lim)


def fin_dynamics_step(state, dt, chain, s, qbar=None):
    """Advance ``(q, v, theta_fin_rad, omega)`` by one step at slider height s."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if qbar is None:
        qbar = float(_qbar_of_s(s, chain))
    lim = stability_limit(chain, max(qbar, 1e-9))
    if dt > 0.95 * lim:
        raise SimulationError("integrator step too large for the stiffest mode",
                              dt=dt, stability_limit=lim)
    q, v, th, om = (float(x) for x in state)
    q, v, th, om, fl, fw, tau, status = _step(q, v, th, om, float(s), float(qbar),
                                              chain.params, float(dt))
    if status:
        raise SimulationError(_status_message(status), q=q, theta=th)
    return np.array([q, v, th, om])


def _status_message(status):
    return {1: "strip deflection reached the connector lever length",
            2: "non-finite state in fin dynamics"}.get(status, "integration failure")


@dataclass
class CycleTrace:
    time: np.ndarray
    slider_s: np.ndarray
    q: np.ndarray
    fin_angle: np.ndarray
    latch_force: np.ndarray
    phase: np.ndarray
    thrust: np.ndarray
    loading_duration: float
    release_duration: float
    snap_time: float
    period: float
    fin_rate: np.ndarray = field(repr=False, default=None)
    qbar: np.ndarray = field(repr=False, default=None)
    delta: np.ndarray = field(repr=False, default=None)
    wall_force: np.ndarray = field(repr=False, default=None)
    connector_torque: np.ndarray = field(repr=False, default=None)
    v: np.ndarray = field(repr=False, default=None)
    phi: float = 0.0
    fired: bool = True
    max_tilt: float = 0.0
    trigger_at_snap: float = float("nan")
    latch_penetration: float = float("nan")

    @property
    def dt(self):
        return float(self.time[1] - self.time[0])

    @property
    def ratio(self):
        return self.loading_duration / self.release_duration

    def phase_labels(self):
        return [ActuatorPhase(int(k)).label for k in self.phase]

    def summary(self):
        from .hydro import cycle_impulse

        return {
            "period_s": self.period,
            "snap_time_s": self.snap_time,
            "loading_duration_s": self.loading_duration,
            "release_duration_s": self.release_duration,
            "load_release_ratio": self.ratio if self.fired else None,
            "peak_thrust_n": float(np.max(self.thrust)),
            "min_thrust_n": float(np.min(self.thrust)),
            "impulse_ns": cycle_impulse(self),
            "peak_latch_force_n": float(np.max(self.latch_force)),
            "trigger_force_at_snap_n": self.trigger_at_snap,
            "latch_penetration_mm": self.latch_penetration,
            "fin_angle_range_deg": [float(np.min(self.fin_angle)), float(np.max(self.fin_angle))],
            "torsion_deg": self.phi,
            "fired": self.fired,
        }


def _bisect(fun, a, b, tol):
    fa = fun(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = fun(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _tilt_excess(t, chain):
    """Latch force minus trigger force along the quasi-static schedule."""
    s = slider_schedule(t, chain)
    qb = _qbar_of_s(s, chain)
    pen = np.maximum(s - chain.params[P_SL], 0.0) * chain.params[P_LATCH]
    fl = chain.params[P_KL] * pen
    trig = 2.0 * chain.beam.k_b * qb / bm.SQRT27
    return fl - trig, fl, trig, qb


def locate_snap(chain, t_grid):
    """Snap time on the loading half-cycle, or None if the latch never wins."""
    half = t_grid <= 0.5 * chain.period
    ex, fl, trig, qb = _tilt_excess(t_grid[half], chain)
    fire = np.nonzero((ex > 0) & (qb > 0))[0]
    max_tilt = float(np.max(fl)) if fl.size else 0.0
    if fire.size == 0:
        return None, max_tilt
    i = int(fire[0])
    if i == 0:
        return float(t_grid[0]), max_tilt
    t_hi = float(t_grid[i])
    t_lo = float(t_grid[i - 1])
    t_s = _bisect(lambda t: float(_tilt_excess(t, chain)[0]), t_lo, t_hi, chain.snap_tol)
    return t_s, max_tilt


def _crossing(t, y, level, start):
    """First time at or after index ``start`` where y rises through level."""
    idx = np.nonzero(y[start:] >= level)[0]
    if idx.size == 0:
        return None
    j = start + int(idx[0])
    if j == 0 or y[j - 1] >= level:
        return float(t[j])
    f = (level - y[j - 1]) / (y[j] - y[j - 1])
    return float(t[j - 1] + f * (t[j] - t[j - 1]))


def _count_flips(q, band):
    side, flips = 0, 0
    for x in q:
        if x > band:
            if side < 0:
                flips += 1
            side = 1
        elif x < -band:
            side = -1
    return flips


def simulate_chain(chain, cycles=1):
    """Integrate ``warmup + cycles`` revolutions and return raw samples."""
    n = int(round(chain.period / chain.dt))
    t = np.arange(n) * chain.dt
    s = slider_schedule(t, chain)
    qbar = np.asarray(_qbar_of_s(s, chain), dtype=float)
    lim = stability_limit(chain, float(np.max(qbar)) if qbar.size else 0.0)
    if chain.dt > 0.95 * lim:
        raise SimulationError("integrator step too large for the stiffest mode",
                              dt=chain.dt, stability_limit=lim)
    q0 = -float(qbar[0])
    lever = chain.params[P_LEVER]
    if abs(q0) >= lever:
        raise SimulationError("strip deflection exceeds the connector lever length", q=q0)
    state = np.array([q0, 0.0, np.arcsin(q0 / lever), 0.0])
    total = chain.warmup + cycles
    out = np.empty((n, 8))
    rec = []
    for k in range(total):
        done, status = _integrate(s, qbar, state, chain.params, chain.dt, out)
        if status:
            raise SimulationError(_status_message(status), cycle=k, time=float(t[done]),
                                  q=float(out[done, 0]))
        if k >= chain.warmup:
            rec.append(out.copy())
    return t, s, qbar, np.concatenate(rec) if len(rec) > 1 else rec[0]


def run_chain(chain, strict=True):
    t, s, qbar, out = simulate_chain(chain)
    q, v, th, om = out[:, 0], out[:, 1], out[:, 2], out[:, 3]
    alpha = out[:, 7]
    thrust = (chain.K_thrust * om * np.abs(om) + chain.A_thrust * alpha) * np.cos(th) * FORCE_SCALE
    delta = chain.beam.L - joint_distance(s, chain.geom)
    t_snap, max_tilt = locate_snap(chain, t)
    half = chain.period / 2.0

    phase = np.full(t.size, int(ActuatorPhase.RECOVERY))
    prep = s < chain.prep_height
    t_exit = _crossing(t, s, chain.prep_height, 0)
    flips = _count_flips(q, 0.25 * float(np.max(qbar)))
    fired = t_snap is not None and flips >= 1

    if not fired:
        if strict:
            raise SimulationError("design does not fire", max_tilt=max_tilt,
                                  trigger_at_tdc=_trigger_at_tdc(chain))
        phase[:] = int(ActuatorPhase.LOADING)
        phase[t >= half] = int(ActuatorPhase.RECOVERY)
        phase[(t >= (t_exit or 0.0)) & (s >= chain.params[P_SL]) & (t < half)] = \
            int(ActuatorPhase.ULTIMATE)
        phase[prep] = int(ActuatorPhase.PREPARATION)
        return CycleTrace(
            time=t, slider_s=s, q=q, fin_angle=np.rad2deg(th), latch_force=out[:, 4],
            phase=phase, thrust=thrust, loading_duration=float("nan"),
            release_duration=float("nan"), snap_time=float("nan"), period=chain.period,
            fin_rate=om, qbar=qbar, delta=delta, wall_force=out[:, 5],
            connector_torque=out[:, 6], v=v, phi=chain.phi, fired=False, max_tilt=max_tilt,
        )
    if flips > 1:
        raise SimulationError("chatter", flips=flips)

    i_snap = int(np.searchsorted(t, t_snap))
    # strip reaches most of its new well
    reached = np.nonzero(q[i_snap:] >= RELEASE_FRACTION * qbar[i_snap:])[0]
    if reached.size == 0:
        raise SimulationError("strip never settles in the released well", snap_time=t_snap)
    j = i_snap + int(reached[0])
    g = q - RELEASE_FRACTION * qbar
    t_rel = float(t[j]) if j == 0 or g[j - 1] >= 0 else \
        float(t[j - 1] + (-g[j - 1]) / (g[j] - g[j - 1]) * chain.dt)
    release = max(t_rel - t_snap, chain.dt)

    # power stroke ends at the fin's first turning point
    pos = np.nonzero(om[i_snap:] > 0)[0]
    i_turn = t.size
    if pos.size:
        k0 = i_snap + int(pos[0])
        neg = np.nonzero(om[k0:] <= 0)[0]
        if neg.size:
            i_turn = k0 + int(neg[0])
    i_exit = int(np.searchsorted(t, t_exit)) if t_exit is not None else 0
    i_latch = _first_index(s >= chain.params[P_SL], i_exit)
    phase[:i_snap] = int(ActuatorPhase.LOADING)
    if i_latch is not None and i_latch < i_snap:
        phase[i_latch:i_snap] = int(ActuatorPhase.ULTIMATE)
    phase[i_snap:i_turn] = int(ActuatorPhase.RELEASE)
    phase[:i_exit] = int(ActuatorPhase.PREPARATION)
    back = _first_index(prep, max(i_turn, int(t.size / 2)))
    if back is not None:
        phase[back:] = int(ActuatorPhase.PREPARATION)

    trig = float(_tilt_excess(t_snap, chain)[2])
    return CycleTrace(
        time=t, slider_s=s, q=q, fin_angle=np.rad2deg(th), latch_force=out[:, 4],
        phase=phase, thrust=thrust, loading_duration=float(t_snap - (t_exit or 0.0)),
        release_duration=float(release), snap_time=float(t_snap), period=chain.period,
        fin_rate=om, qbar=qbar, delta=delta, wall_force=out[:, 5], connector_torque=out[:, 6],
        v=v, phi=chain.phi, fired=True, max_tilt=max_tilt, trigger_at_snap=trig,
        latch_penetration=trig / chain.params[P_KL],
    )


def _first_index(mask, start):
    idx = np.nonzero(mask[start:])[0]
    return None if idx.size == 0 else start + int(idx[0])


def _trigger_at_tdc(chain):
    qb = _qbar_of_s(chain.geom.H, chain)
    return float(2.0 * chain.beam.k_b * qb / bm.SQRT27)


def run_cycle(config, deflection=None, area=None, dt=None, strict=True):
    """Simulate one steady crank revolution of a single beam-fin chain."""
    return run_chain(build_chain(config, deflection=deflection, area=area, dt=dt), strict=strict)


def latch_tilt(s, q, geom, spec=None, stiffness=450.0, width=0.5):
    """Latch push on the strip (N); zero below engagement or in the released well."""
    if geom.latch_fraction >= 1.0 or s <= geom.latch_height:
        return 0.0
    return float(stiffness * (s - geom.latch_height) * 0.5 * (1.0 - np.tanh(q / width)))


def limited_block_constraint(q_candidate, s, geom, threshold_fraction=0.05):
    """Near BDC only the fin-down well is admissible."""
    if geom.limited_block and s <= threshold_fraction * geom.H:
        return -abs(q_candidate)
    return q_candidate


def loading_energy_balance(config, speed_scale=5e-4):
    """Slider work into the chain versus stored elastic energy over Loading.

    Run with the motor slowed so the loading is quasi-static.  The window
    ends once the latch force reaches 90% of the trigger force, before the
    strip leaves its well.
    """
    cfg = config.with_values(sim={"speed_scale": speed_scale}, drive={"warmup_cycles": 0})
    chain = build_chain(cfg)
    t, s, qbar, out = simulate_chain(chain)
    q, v, th, tau = out[:, 0], out[:, 1], out[:, 2], out[:, 6]
    delta = chain.beam.L - joint_distance(s, chain.geom)
    ex, fl_qs, trig, _ = _tilt_excess(t, chain)
    t_exit = _crossing(t, s, chain.prep_height, 0)
    i0 = int(np.searchsorted(t, t_exit))
    late = np.nonzero((fl_qs >= 0.9 * trig) & (trig > 0) & (t < chain.period / 2))[0]
    if late.size == 0:
        raise SimulationError("latch never approaches the trigger force")
    i1 = int(late[0])
    sl = slice(i0, i1 + 1)
    spec, phi = chain.beam, chain.phi
    ddelta = np.gradient(delta, t)
    power = bm.compression_force(q, delta, phi, spec) * ddelta + out[:, 4] * v
    work = float(np.trapezoid(power[sl], t[sl]))
    lever = chain.params[P_LEVER]
    u = bm.potential_energy(q, delta, phi, spec)
    u += 0.5 * chain.params[P_KC] * (np.arcsin(q / lever) - th) ** 2
    stored = float(u[i1] - u[i0])
    return work, stored
