"""Headway tracking and string-stability measurements over traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_HEADWAY_SPEED = 1.0  # m/s; headway is not reported below this


@dataclass
class MetricsReport:
    headway_rmse: float
    net_headway_rmse: float
    max_abs_spacing_error: float
    min_gap: float
    settle_time: float
    collided: bool = False
    amplification_ratios: tuple = ()

    def as_text(self, prefix: str = "") -> str:
        lines = [
            f"{prefix}headway_rmse_s = {self.headway_rmse:.6f}",
            f"{prefix}net_headway_rmse_s = {self.net_headway_rmse:.6f}",
            f"{prefix}max_abs_spacing_error_m = {self.max_abs_spacing_error:.6f}",
            f"{prefix}min_gap_m = {self.min_gap:.6f}",
            f"{prefix}settle_time_s = {self.settle_time:.6f}",
            f"{prefix}collided = {str(self.collided).lower()}",
        ]
        if self.amplification_ratios:
            ratios = ",".join(f"{r:.6f}" for r in self.amplification_ratios)
            lines.append(f"{prefix}amplification_ratios = {ratios}")
        return "\n".join(lines) + "\n"


def time_headway(gap: float, v_host: float) -> float | None:
    if v_host < MIN_HEADWAY_SPEED:
        return None
    return gap / v_host


def _window(trace, start: float) -> np.ndarray:
    return trace.t >= start - 1e-9


def headway_rmse(trace, target: float, vehicle: int = 1, start: float = 0.0,
                 standstill: float = 0.0) -> float:
    """RMS of ``h - target`` over samples in the window where headway is defined.

    With ``standstill = d0`` the headway is taken net of the standstill
    distance, ``(gap - d0) / v``, which is what a constant time headway policy
    holds at ``t_hw``.  The default compares raw ``gap / v``.
    """
    if not trace.records:
        raise ValueError("empty trace")
    win = _window(trace, start)
    h = trace.column(vehicle, "h")[win]
    if standstill:
        with np.errstate(divide="ignore", invalid="ignore"):
            h = h - standstill / trace.column(vehicle, "v")[win]
    h = h[~np.isnan(h)]
    if h.size == 0:
        raise ValueError("no samples with a defined headway")
    return float(np.sqrt(np.mean((h - target) ** 2)))


def _norm(x: np.ndarray, norm: str) -> float:
    if norm == "Linf":
        return float(np.max(np.abs(x))) if x.size else 0.0
    if norm == "L2":
        return float(np.sqrt(np.sum(x * x)))
    raise ValueError(f"unknown norm {norm!r}")


def ratio_of_norms(upstream, downstream, norm: str = "Linf") -> float:
    """``|downstream| / |upstream|``, with 0/0 = 0 and x/0 = inf."""
    up = _norm(np.asarray(upstream, dtype=float), norm)
    down = _norm(np.asarray(downstream, dtype=float), norm)
    if up == 0.0:
        return 0.0 if down == 0.0 else math.inf
    return down / up


def amplification_ratios(trace, norm: str = "Linf", start: float = 0.0) -> list[float]:
    """Spacing-error amplification between consecutive followers over the excitation window."""
    n = trace.n_vehicles - 1
    if n < 2:
        raise ValueError("need at least two followers")
    win = _window(trace, start)
    errs = [np.nan_to_num(trace.column(i, "e")[win]) for i in range(1, n + 1)]
    return [ratio_of_norms(errs[i], errs[i + 1], norm) for i in range(n - 1)]


def collision_and_min_gap(trace, vehicle: int | None = None) -> tuple[bool, float]:
    if trace.n_vehicles < 2:
        raise ValueError("trace has no followers")
    ids = range(1, trace.n_vehicles) if vehicle is None else [vehicle]
    min_gap = min(float(np.nanmin(trace.column(i, "gap"))) for i in ids)
    return trace.collided, min_gap


def settle_time(trace, vehicle: int = 1, tol: float = 0.05) -> float:
    """Last time ``|e|`` exceeded ``tol``; 0 if it never did."""
    e = trace.column(vehicle, "e")
    over = np.nonzero(np.abs(np.nan_to_num(e)) > tol)[0]
    return 0.0 if over.size == 0 else float(trace.t[over[-1]])


def max_abs_spacing_error(trace, vehicle: int = 1, start: float = 0.0) -> float:
    e = trace.column(vehicle, "e")[_window(trace, start)]
    e = e[~np.isnan(e)]
    return float(np.max(np.abs(e))) if e.size else 0.0


def report(trace, target: float, vehicle: int = 1, start: float = 0.0, standstill: float = 0.0,
           ratios: bool = False, norm: str = "Linf") -> MetricsReport:
    """All scalar metrics of one follower.

    ``headway_rmse`` uses the raw ``gap / v``; ``net_headway_rmse`` subtracts
    ``standstill / v`` first.  Either is NaN when the window holds no defined
    headway, e.g. after an early crash.
    """
    collided, min_gap = collision_and_min_gap(trace, vehicle)

    def rmse(d0):
        try:
            return headway_rmse(trace, target, vehicle, start, d0)
        except ValueError:
            return math.nan

    return MetricsReport(
        headway_rmse=rmse(0.0),
        net_headway_rmse=rmse(standstill),
        max_abs_spacing_error=max_abs_spacing_error(trace, vehicle, start),
        min_gap=min_gap,
        settle_time=settle_time(trace, vehicle),
        collided=collided,
        amplification_ratios=tuple(amplification_ratios(trace, norm, start)) if ratios else (),
    )
