"""Lead-vehicle drivers: the Intelligent Driver Model and trace replay."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

V0_FLOOR = 0.1  # m/s; keeps (v/v0)^delta finite when the set speed is zero


@dataclass(frozen=True)
class IdmParams:
    v0: float = 33.33
    s0: float = 2.0
    T: float = 1.0
    a: float = 1.5
    b: float = 2.0
    delta: float = 4.0
    b_hard: float = 4.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.s0 <= 0 or self.delta <= 0:
            raise ValueError("IDM a, b, s0 and delta must be positive")
        if self.T < 0:
            raise ValueError("IDM time gap T must be non-negative")
        if self.b_hard < self.b:
            raise ValueError("b_hard must be at least b")


class SetSpeedSchedule:
    """Piecewise-constant desired speed; the value at ``t`` is the latest entry with time <= t."""

    def __init__(self, points):
        points = [(float(t), float(v)) for t, v in points]
        if not points:
            raise ValueError("set-speed schedule is empty")
        times = [t for t, _ in points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("set-speed schedule times must be strictly increasing")
        if any(v < 0 for _, v in points):
            raise ValueError("set speeds must be non-negative")
        self.points = points

    def __call__(self, t: float) -> float:
        v0 = self.points[0][1]
        for ti, vi in self.points:
            if ti <= t:
                v0 = vi
            else:
                break
        return v0

    def __eq__(self, other):
        return isinstance(other, SetSpeedSchedule) and self.points == other.points

    def __repr__(self):
        return f"SetSpeedSchedule({self.points!r})"


def idm_desired_gap(v: float, dv: float, p: IdmParams) -> float:
    """Desired net gap s*; ``dv`` is own speed minus leader speed."""
    dynamic = v * p.T + v * dv / (2.0 * math.sqrt(p.a * p.b))
    return p.s0 + max(0.0, dynamic)


def idm_acceleration(v: float, gap: float, dv: float, p: IdmParams) -> float:
    """IDM acceleration, clamped to ``[-b_hard, a]``. Pass ``gap=math.inf`` for free road."""
    if not gap > 0:
        raise ValueError(f"IDM gap must be positive, got {gap}")
    v0 = max(p.v0, V0_FLOOR)
    interaction = 0.0 if math.isinf(gap) else (idm_desired_gap(v, dv, p) / gap) ** 2
    raw = p.a * (1.0 - (v / v0) ** p.delta - interaction)
    return min(max(raw, -p.b_hard), p.a)


def idm_equilibrium_gap(v: float, p: IdmParams) -> float:
    """Closed-form steady-state gap behind a leader at the same constant speed ``v < v0``."""
    ratio = (v / p.v0) ** p.delta
    if ratio >= 1:
        raise ValueError("no finite equilibrium gap at or above v0")
    return idm_desired_gap(v, 0.0, p) / math.sqrt(1.0 - ratio)


class IdmDriver:
    """IDM lead vehicle on a free road with a time-varying set speed."""

    def __init__(self, params: IdmParams, schedule: SetSpeedSchedule):
        self.params = params
        self.schedule = schedule

    def accel(self, t: float, v: float) -> float:
        p = replace(self.params, v0=self.schedule(t))
        return idm_acceleration(v, math.inf, 0.0, p)


class ReplayTrace:
    """Recorded ``(t, v, a)`` samples, linearly interpolated and clamped at both ends."""

    def __init__(self, t, v, a):
        self.t = np.asarray(t, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.a = np.asarray(a, dtype=float)
        if self.t.size == 0:
            raise ValueError("replay trace is empty")
        if not (self.t.shape == self.v.shape == self.a.shape):
            raise ValueError("replay trace columns differ in length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("replay trace times must be strictly increasing")

    @classmethod
    def from_csv(cls, path) -> "ReplayTrace":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["t", "v", "a"]:
                raise ValueError(f"{path}: expected header 't,v,a'")
            rows = [(float(r["t"]), float(r["v"]), float(r["a"])) for r in reader]
        if not rows:
            raise ValueError(f"{path}: replay trace is empty")
        t, v, a = zip(*rows)
        return cls(t, v, a)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,v,a\n")
            for row in zip(self.t, self.v, self.a):
                fh.write("%.3f,%.6f,%.6f\n" % row)

    def __call__(self, t: float) -> tuple[float, float]:
        return float(np.interp(t, self.t, self.v)), float(np.interp(t, self.t, self.a))


class AccelProfile:
    """Piecewise-constant lead acceleration ``[(t, a), ...]``; zero before the first entry."""

    def __init__(self, points):
        points = [(float(t), float(a)) for t, a in points]
        times = [t for t, _ in points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("profile times must be strictly increasing")
        self.points = points

    def __call__(self, t: float) -> float:
        a = 0.0
        for ti, ai in self.points:
            if ti <= t + 1e-9:
                a = ai
            else:
                break
        return a

    def __eq__(self, other):
        return isinstance(other, AccelProfile) and self.points == other.points

    def __repr__(self):
        return f"AccelProfile({self.points!r})"


def replay_driver(trace: ReplayTrace, t: float) -> tuple[float, float]:
    return trace(t)
