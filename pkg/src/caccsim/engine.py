"""Fixed-step, multi-rate simulation of a lead vehicle and a chain of followers.

Vehicle 0 is the lead; vehicle ``i > 0`` follows vehicle ``i - 1``.  Every
``dt`` the controllers run and the vehicles are integrated; radar, camera and
V2V broadcasts run at their own periods and are held between updates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from caccsim.channel import V2VChannel
from caccsim.controller import ControllerMode, UpperController
from caccsim.idm import IdmDriver, ReplayTrace, idm_acceleration
from caccsim.metrics import time_headway
from caccsim.perception import (
    VehicleSnapshot,
    select_in_lane_target,
    simulate_camera,
    simulate_radar,
)
from caccsim.plant import LowLevelLoop

log = logging.getLogger(__name__)


class ControllerFault(RuntimeError):
    """A controller produced a non-finite acceleration."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    duration: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.duration < self.dt:
            raise ValueError("duration must be at least one step")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class VehicleState:
    x: float  # front bumper, arc length along the road
    v: float
    a: float = 0.0


def integrate_step(state: VehicleState, accel: float, dt: float) -> VehicleState:
    """Semi-implicit Euler with a no-reverse clamp on speed."""
    if not math.isfinite(accel):
        raise ControllerFault(f"non-finite acceleration command {accel!r}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = state.v + accel * dt
    if v < 0.0:
        v = 0.0
        accel = -state.v / dt
    return VehicleState(state.x + v * dt, v, accel)


@dataclass(slots=True)
class VehicleSignals:
    x: float
    v: float
    a: float
    a_des: float | None = None
    gap: float | None = None
    h: float | None = None
    e: float | None = None
    ff: float | None = None
    target_id: int | None = None
    bsm_age: float | None = None


SIGNALS = ("x", "v", "a", "a_des", "gap", "h", "e", "ff", "target_id", "bsm_age")


@dataclass(slots=True)
class TraceRecord:
    t: float
    vehicles: tuple


@dataclass
class Trace:
    dt: float
    records: list = field(default_factory=list)
    collided: bool = False
    labels: tuple = ()  # "lead", "acc", "cacc" per vehicle

    @property
    def n_vehicles(self) -> int:
        return len(self.records[0].vehicles) if self.records else len(self.labels)

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, vehicle: int, name: str) -> np.ndarray:
        """Signal of one vehicle as floats, ``nan`` where absent."""
        if name not in SIGNALS:
            raise KeyError(name)
        out = np.empty(len(self.records))
        for k, rec in enumerate(self.records):
            val = getattr(rec.vehicles[vehicle], name)
            out[k] = np.nan if val is None else val
        return out

    def rounded(self, digits: int = 6) -> "Trace":
        """Copy with every value rounded as the CSV writer would emit it."""
        def rnd(val):
            return val if val is None or isinstance(val, int) else round(val, digits)
        recs = [TraceRecord(round(r.t, digits),
                            tuple(VehicleSignals(*(rnd(getattr(v, n)) for n in SIGNALS)) for v in r.vehicles))
                for r in self.records]
        return Trace(self.dt, recs, self.collided, self.labels)


class _Follower:
    def __init__(self, idx, cfg, dt, perception, seed):
        self.idx = idx
        self.cfg = cfg
        self.ctrl = UpperController(cfg.controller, dt)
        self.low = LowLevelLoop(cfg.low_level, cfg.plant)
        self.perceived = None  # held (gap, v_rel, target_id)
        self.lines = (None, None)
        self.rng = np.random.default_rng([seed, 7919, idx])


def _lead_driver(lead, base_dir=None):
    if lead.driver == "idm":
        return IdmDriver(lead.idm, lead.schedule)
    if lead.driver == "replay":
        return ReplayTrace.from_csv(lead.trace)
    if lead.driver == "profile":
        return lead.profile
    raise ValueError(f"unknown lead driver {lead.driver!r}")


def initial_states(scenario):
    """Lead at speed ``v_init``; each follower at the policy gap for that speed, last one at x=0."""
    lead = scenario.lead
    driver = _lead_driver(lead)
    if isinstance(driver, ReplayTrace):
        v0, a0 = driver(0.0)
    else:
        v0, a0 = lead.v_init, 0.0
    gaps = []
    for f in scenario.followers:
        pol = f.controller.policy
        gaps.append(f.initial_gap if f.initial_gap is not None else v0 * pol.t_hw + pol.d0)
    lengths = [lead.length] + [f.length for f in scenario.followers]
    xs = [0.0]
    for i in range(len(scenario.followers), 0, -1):
        xs.append(xs[-1] + gaps[i - 1] + lengths[i - 1])
    xs.reverse()
    states = [VehicleState(xs[0], v0, a0)]
    states += [VehicleState(x, v0, 0.0) for x in xs[1:]]
    return driver, states, lengths


def run_scenario(scenario) -> Trace:
    """Simulate ``scenario`` (a :class:`caccsim.config.ScenarioConfig`) and return its trace."""
    sim = scenario.sim
    dt, n = sim.dt, sim.n_steps
    driver, states, lengths = initial_states(scenario)
    followers = [_Follower(i + 1, f, dt, scenario.perception, sim.seed)
                 for i, f in enumerate(scenario.followers)]
    channel = V2VChannel(scenario.channel, sim.seed) if scenario.channel is not None else None
    if channel is None and any(f.cfg.controller.mode is ControllerMode.CACC for f in followers):
        raise ValueError("CACC followers need a V2V channel")

    def every(period):
        steps = int(round(period / dt))
        if steps < 1 or abs(steps * dt - period) > 1e-9:
            raise ValueError(f"period {period} is not a multiple of dt={dt}")
        return steps

    bsm_every = every(scenario.channel.period) if channel else None
    perc = scenario.perception
    uses_perception = any(f.cfg.measurement == "perception" for f in followers)
    radar_every = every(perc.radar_period) if uses_perception else None
    camera_every = every(perc.camera_period) if uses_perception else None

    trace = Trace(dt, labels=("lead",) + tuple(f.cfg.controller.mode.value for f in followers))
    for k in range(n + 1):
        t = k * dt
        if channel is not None and k % bsm_every == 0 and k < n:
            for i, st in enumerate(states):
                channel.send(i, t, st.a, st.v, st.x)

        if uses_perception and (k % radar_every == 0 or k % camera_every == 0):
            world = [VehicleSnapshot(i, st.x, st.v, 0.0, lengths[i]) for i, st in enumerate(states)]

        row = [VehicleSignals(states[0].x, states[0].v, states[0].a)]
        commands = []
        collided = False
        for fol in followers:
            i = fol.idx
            st, pred = states[i], states[i - 1]
            gap_true = pred.x - lengths[i - 1] - st.x
            collided |= gap_true <= 0.0
            if fol.cfg.measurement == "perception":
                if k % camera_every == 0:
                    ego = VehicleSnapshot(i, st.x, st.v, 0.0, lengths[i])
                    fol.lines = simulate_camera(perc.geometry, ego, perc.mounting,
                                                perc.visibility(t), perc.fit_range)
                if k % radar_every == 0:
                    dets = simulate_radar(world, i, perc.geometry, perc.mounting, perc.noise, fol.rng)
                    tgt = select_in_lane_target(dets, *fol.lines, perc.mounting, perc.geometry.lane_width)
                    fol.perceived = None if tgt is None else (tgt.x - perc.mounting.dx_rc, tgt.v_rel, tgt.id)
                gap_m, v_rel, target = fol.perceived if fol.perceived else (None, None, None)
            else:
                gap_m, v_rel, target = gap_true, pred.v - st.v, i - 1

            ff_in, age = None, None
            if channel is not None:
                got = channel.latest_accel(i - 1, t)
                if got is not None:
                    ff_in, age = got
            cmd = fol.ctrl.step(gap_m, v_rel, st.v, st.a, ff_in)
            commands.append(cmd.a_des)
            row.append(VehicleSignals(
                st.x, st.v, st.a, a_des=cmd.a_des, gap=gap_true,
                h=time_headway(gap_true, st.v), e=cmd.e,
                ff=cmd.ff if fol.cfg.controller.mode is ControllerMode.CACC else None,
                target_id=target, bsm_age=age))
        trace.records.append(TraceRecord(t, tuple(row)))
        if collided:
            trace.collided = True
            log.warning("collision at t=%.2f s", t)
            break
        if k == n:
            break

        lead = states[0]
        if isinstance(driver, ReplayTrace):
            v_next, a_next = driver(t + dt)
            new = [VehicleState(lead.x + v_next * dt, v_next, a_next)]
        elif isinstance(driver, IdmDriver):
            new = [integrate_step(lead, driver.accel(t, lead.v), dt)]
        else:
            new = [integrate_step(lead, driver(t), dt)]
        for fol, a_des in zip(followers, commands):
            st = states[fol.idx]
            accel = fol.low.step(a_des, st.a, st.v, dt)
            new.append(integrate_step(st, accel, dt))
        states = new
    return trace


def follow_constant_leader(v_lead: float, params, gap0: float, v_init: float | None = None,
                           dt: float = 0.01, duration: float = 120.0) -> tuple[np.ndarray, np.ndarray]:
    """An IDM vehicle behind a leader holding ``v_lead``; returns (gap, leader-minus-follower speed) per step."""
    n = int(round(duration / dt))
    lead_x = gap0
    ego = VehicleState(0.0, v_lead if v_init is None else v_init)
    gaps, dvs = np.empty(n + 1), np.empty(n + 1)
    for k in range(n + 1):
        gap = lead_x - ego.x
        gaps[k], dvs[k] = gap, v_lead - ego.v
        if k == n:
            break
        # IDM's dv is approach rate: follower minus leader
        ego = integrate_step(ego, idm_acceleration(ego.v, gap, ego.v - v_lead, params), dt)
        lead_x += v_lead * dt
    return gaps, dvs
