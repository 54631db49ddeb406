"""Ego longitudinal plant and the low-level acceleration tracking loop.

Two fidelities are available:

* ``IdealLag`` -- the closed low-level loop is a first-order lag ``1/(tau s + 1)``
  from desired to actual acceleration.
* ``GainScheduledPi`` -- a speed-scheduled PI loop commanding traction/brake
  force through an actuator lag into a force-balance vehicle model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class PlantParams:
    mass: float = 1650.0
    drag_coeff: float = 0.39  # lumped 0.5*rho*Cd*A, N/(m/s)^2
    rolling_coeff: float = 0.01
    g: float = 9.81
    actuator_lag: float = 0.2
    force_min: float = -8000.0
    force_max: float = 4000.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.drag_coeff < 0:
            raise ValueError("drag_coeff must be non-negative")
        if not 0 <= self.rolling_coeff < 1:
            raise ValueError("rolling_coeff must be in [0, 1)")
        if not self.force_min < 0 < self.force_max:
            raise ValueError("force range must straddle zero")
        if self.actuator_lag < 0:
            raise ValueError("actuator_lag must be non-negative")


@dataclass(frozen=True)
class IdealLag:
    tau: float = 0.4

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")


DEFAULT_SCHEDULE = ((0.0, 0.8, 1.5), (5.0, 1.0, 2.0), (15.0, 1.0, 2.5))


@dataclass(frozen=True)
class GainScheduledPi:
    # (speed breakpoint m/s, kp, ki); kp is dimensionless, ki is 1/s
    schedule: tuple = DEFAULT_SCHEDULE
    integrator_limit: float = 3.0

    def __post_init__(self):
        if not self.schedule:
            raise ValueError("gain schedule is empty")
        speeds = [row[0] for row in self.schedule]
        if any(b <= a for a, b in zip(speeds, speeds[1:])):
            raise ValueError("schedule breakpoints must be strictly increasing")
        if any(kp < 0 or ki < 0 for _, kp, ki in self.schedule):
            raise ValueError("schedule gains must be non-negative")
        if self.integrator_limit <= 0:
            raise ValueError("integrator_limit must be positive")

    def gains(self, v: float) -> tuple[float, float]:
        """Linearly interpolated (kp, ki) at speed ``v``, clamped at the ends."""
        rows = self.schedule
        if v <= rows[0][0]:
            return rows[0][1], rows[0][2]
        if v >= rows[-1][0]:
            return rows[-1][1], rows[-1][2]
        for (v0, kp0, ki0), (v1, kp1, ki1) in zip(rows, rows[1:]):
            if v0 <= v <= v1:
                w = (v - v0) / (v1 - v0)
                return kp0 + w * (kp1 - kp0), ki0 + w * (ki1 - ki0)
        raise AssertionError("unreachable")


@dataclass
class PiState:
    integral: float = 0.0
    force: float = 0.0  # last saturated command
    saturated: bool = False


def ideal_lag_update(a_actual: float, a_des: float, tau: float, dt: float) -> float:
    """Exact zero-order-hold step of ``1/(tau s + 1)``."""
    if tau <= 0 or dt <= 0:
        raise ValueError("tau and dt must be positive")
    return a_actual + (1.0 - math.exp(-dt / tau)) * (a_des - a_actual)


def pi_low_level(a_des: float, a_meas: float, v: float, state: PiState,
                 mode: GainScheduledPi, params: PlantParams, dt: float) -> tuple[float, PiState]:
    """One PI step; returns the saturated force command and the new state.

    Integration is frozen while the previous command sat on a force limit and
    the error would push further into it.
    """
    kp, ki = mode.gains(v)
    err = a_des - a_meas
    integral = state.integral
    pushing_out = state.saturated and (err > 0) == (state.force > 0)
    if not pushing_out:
        integral += err * dt
    lim = mode.integrator_limit
    integral = min(max(integral, -lim), lim)
    raw = params.mass * (kp * err + ki * integral)
    force = min(max(raw, params.force_min), params.force_max)
    return force, PiState(integral=integral, force=force, saturated=force != raw)


def plant_accel(v: float, force: float, params: PlantParams) -> float:
    """Force balance: traction minus aerodynamic drag and rolling resistance."""
    if v < 0:
        raise ValueError("speed must be non-negative")
    resist = params.rolling_coeff * params.mass * params.g if v > 0 else 0.0
    return (force - params.drag_coeff * v * v - resist) / params.mass


@dataclass
class LowLevelLoop:
    """Per-vehicle low-level loop: turns a_des into the acceleration applied this step."""

    mode: object = field(default_factory=IdealLag)
    params: PlantParams = field(default_factory=PlantParams)
    pi_state: PiState = field(default_factory=PiState)
    wheel_force: float = 0.0  # force after the actuator lag

    def step(self, a_des: float, a_meas: float, v: float, dt: float) -> float:
        if isinstance(self.mode, IdealLag):
            return ideal_lag_update(a_meas, a_des, self.mode.tau, dt)
        cmd, self.pi_state = pi_low_level(a_des, a_meas, v, self.pi_state, self.mode, self.params, dt)
        lag = self.params.actuator_lag
        if lag > 0:
            self.wheel_force += (1.0 - math.exp(-dt / lag)) * (cmd - self.wheel_force)
        else:
            self.wheel_force = cmd
        return plant_accel(v, self.wheel_force, self.params)
