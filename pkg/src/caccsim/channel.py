"""Simulated DSRC broadcast link carrying BSM-style records between vehicles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# delivery instants are compared against k*dt sample times
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class Bsm:
    sender_id: int
    seq: int
    t_sent: float
    accel: float
    speed: float
    position: float


@dataclass(frozen=True)
class ChannelParams:
    period: float = 0.1
    latency: float = 0.02
    jitter: float = 0.0
    loss_prob: float = 0.0
    stale_timeout: float = 0.5

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.latency < 0 or self.jitter < 0:
            raise ValueError("latency and jitter must be non-negative")
        if self.jitter > self.latency:
            raise ValueError("jitter must not exceed latency")
        if not 0 <= self.loss_prob <= 1:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.stale_timeout <= 0:
            raise ValueError("stale_timeout must be positive")


def message_rng(seed: int, sender_id: int, seq: int) -> np.random.Generator:
    """Independent stream per message, so drops depend only on (seed, sender, seq)."""
    return np.random.default_rng([seed, sender_id, seq])


def broadcast(bsm: Bsm, params: ChannelParams, rng: np.random.Generator) -> float | None:
    """Delivery time of ``bsm``, or ``None`` if the channel drops it."""
    drop_draw, jitter_draw = rng.random(2)
    if drop_draw < params.loss_prob:
        return None
    return bsm.t_sent + params.latency + params.jitter * (2.0 * jitter_draw - 1.0)


class V2VChannel:
    """Broadcast medium shared by all vehicles of one scenario."""

    def __init__(self, params: ChannelParams, seed: int = 0):
        self.params = params
        self.seed = seed
        self._pending: dict[int, list[tuple[float, Bsm]]] = {}
        self._delivered: dict[int, Bsm] = {}
        self._last_due: dict[int, float] = {}
        self._next_seq: dict[int, int] = {}
        self.sent: list[Bsm] = []
        self.delivered_log: list[tuple[float, Bsm]] = []

    def next_seq(self, sender_id: int) -> int:
        return self._next_seq.get(sender_id, 0)

    def send(self, sender_id: int, t: float, accel: float, speed: float, position: float) -> float | None:
        seq = self.next_seq(sender_id)
        self._next_seq[sender_id] = seq + 1
        bsm = Bsm(sender_id, seq, t, accel, speed, position)
        self.sent.append(bsm)
        due = broadcast(bsm, self.params, message_rng(self.seed, sender_id, seq))
        if due is None:
            return None
        # jitter must not reorder what the application sees
        due = max(due, self._last_due.get(sender_id, -np.inf))
        self._last_due[sender_id] = due
        self._pending.setdefault(sender_id, []).append((due, bsm))
        return due

    def _deliver(self, sender_id: int, t: float) -> None:
        queue = self._pending.get(sender_id)
        while queue and queue[0][0] <= t + _TIME_EPS:
            due, bsm = queue.pop(0)
            self._delivered[sender_id] = bsm
            self.delivered_log.append((due, bsm))

    def latest(self, sender_id: int, t: float) -> Bsm | None:
        self._deliver(sender_id, t)
        return self._delivered.get(sender_id)

    def latest_accel(self, sender_id: int, t: float) -> tuple[float, float] | None:
        """``(accel, age)`` of the freshest delivered message, or ``None`` if none or stale."""
        bsm = self.latest(sender_id, t)
        if bsm is None:
            return None
        age = t - bsm.t_sent
        if age > self.params.stale_timeout + _TIME_EPS:
            return None
        return bsm.accel, age
