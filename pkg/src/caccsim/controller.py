"""Upper-level car-following controller (ACC / CACC).

The follower regulates the clearance to its target under a constant time
headway policy with a PD law.  In CACC mode the target's broadcast
acceleration is passed through ``F(s) = (tau s + 1) / (T_hw s + 1)`` and added
at the desired-acceleration level.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class ControllerMode(str, enum.Enum):
    ACC = "acc"
    CACC = "cacc"


@dataclass(frozen=True)
class SpacingPolicy:
    t_hw: float = 1.0
    d0: float = 3.0
    l: float = 4.5

    def __post_init__(self):
        if self.t_hw <= 0 or self.d0 <= 0 or self.l <= 0:
            raise ValueError("t_hw, d0 and l must be positive")


@dataclass(frozen=True)
class UpperGains:
    w_k: float
    k_p: float
    k_d: float


def gains_from_bandwidth(w_k: float) -> UpperGains:
    """PD gains from the loop bandwidth: ``k_d = w_k`` and ``k_p = k_d**2``."""
    if not w_k > 0:
        raise ValueError(f"w_k must be positive, got {w_k}")
    return UpperGains(w_k=w_k, k_p=w_k * w_k, k_d=w_k)


def desired_spacing(v_host: float, policy: SpacingPolicy) -> float:
    return v_host * policy.t_hw + policy.d0


def spacing_error(gap: float, v_host: float, policy: SpacingPolicy) -> float:
    """Positive when the follower is further back than the policy asks."""
    return gap - desired_spacing(v_host, policy)


def spacing_error_rate(v_rel: float, a_host: float, policy: SpacingPolicy) -> float:
    # d/dt (gap - v T_hw - d0) with gap' = v_target - v_host
    return v_rel - policy.t_hw * a_host


def pd_command(e: float, e_dot: float, gains: UpperGains) -> float:
    return gains.k_p * e + gains.k_d * e_dot


@dataclass
class FeedforwardFilter:
    """Discrete ``(tau s + 1)/(T_hw s + 1)``.

    Realized as ``y = (tau/T_hw) u + (1 - tau/T_hw) w`` with ``T_hw w' = u - w``.
    The state is advanced with the exact zero-order-hold solution, so a held
    input reproduces the continuous response at every sample.
    """

    tau: float
    t_hw: float
    state: float = 0.0

    def __post_init__(self):
        if self.tau <= 0 or self.t_hw <= 0:
            raise ValueError("tau and t_hw must be positive")

    def step(self, u: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        ratio = self.tau / self.t_hw
        y = ratio * u + (1.0 - ratio) * self.state
        self.state += (1.0 - math.exp(-dt / self.t_hw)) * (u - self.state)
        return y

    def reset(self) -> None:
        self.state = 0.0


def feedforward_step(a_target: float, filt: FeedforwardFilter, dt: float) -> float:
    return filt.step(a_target, dt)


@dataclass(frozen=True)
class ControllerConfig:
    policy: SpacingPolicy = field(default_factory=SpacingPolicy)
    w_k: float = 1.0
    tau: float = 0.4
    mode: ControllerMode = ControllerMode.ACC
    a_min: float = -4.0
    a_max: float = 2.0
    cruise_speed: float = 25.0  # speed hold when no target is measured

    def __post_init__(self):
        gains_from_bandwidth(self.w_k)
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not self.a_min < 0 < self.a_max:
            raise ValueError("command limits must straddle zero")
        if self.cruise_speed < 0:
            raise ValueError("cruise_speed must be non-negative")


@dataclass
class Command:
    a_des: float
    e: float | None
    e_dot: float | None
    ff: float


class UpperController:
    """Stateful upper controller owned by one follower."""

    def __init__(self, config: ControllerConfig, dt: float):
        self.config = config
        self.gains = gains_from_bandwidth(config.w_k)
        self.dt = dt
        self.filter = FeedforwardFilter(config.tau, config.policy.t_hw)

    def step(self, gap: float | None, v_rel: float | None, v_host: float, a_host: float,
             a_target_ff: float | None) -> Command:
        cfg = self.config
        ff = 0.0
        if cfg.mode is ControllerMode.CACC:
            # a stale or missing broadcast feeds zero, so CACC decays toward ACC
            ff = self.filter.step(0.0 if a_target_ff is None else a_target_ff, self.dt)
        if gap is None:
            e = e_dot = None
            raw = self.gains.k_d * (cfg.cruise_speed - v_host)
        else:
            e = spacing_error(gap, v_host, cfg.policy)
            e_dot = spacing_error_rate(v_rel, a_host, cfg.policy)
            raw = pd_command(e, e_dot, self.gains) + ff
        return Command(a_des=min(max(raw, cfg.a_min), cfg.a_max), e=e, e_dot=e_dot, ff=ff)


def upper_controller(gap, v_rel, v_host, a_host, a_target_ff, mode, config, filt=None, dt=0.01):
    """Single-shot form of :class:`UpperController`; ``filt`` carries the CACC filter memory."""
    config = ControllerConfig(config.policy, config.w_k, config.tau, ControllerMode(mode),
                              config.a_min, config.a_max, config.cruise_speed)
    ctrl = UpperController(config, dt)
    if filt is not None:
        ctrl.filter = filt
    return ctrl.step(gap, v_rel, v_host, a_host, a_target_ff).a_des
