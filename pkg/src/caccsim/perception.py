"""Synthetic radar/camera sensing and in-lane target selection.

Frame convention used throughout: ``x`` points along the ego heading and ``y``
is positive to the RIGHT, so the left lane boundary is numerically below the
right one and the in-lane test reads ``LB < y < RB``.  Radar bearings are
positive toward ``+y``.  Road positions are ``(s, d)``: arc length along the
ego-lane centerline and signed lateral offset (right positive).  A positive
curvature bends the road toward ``+y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class RoadGeometry:
    """Chain of constant-curvature segments ``(length, curvature)``; the last one extends forever."""

    segments: tuple = ((math.inf, 0.0),)
    lane_width: float = 3.5

    def __post_init__(self):
        if self.lane_width <= 2.5:
            raise ValueError("lane_width must exceed 2.5 m")
        if not self.segments:
            raise ValueError("road needs at least one segment")
        for length, kappa in self.segments:
            if length <= 0:
                raise ValueError("segment lengths must be positive")
            if kappa != 0 and abs(1.0 / kappa) < 50.0:
                raise ValueError("curve radius must be at least 50 m")
        starts = [(0.0, 0.0, 0.0, 0.0)]  # s, X, Y, heading
        for length, kappa in self.segments[:-1]:
            s0, x0, y0, h0 = starts[-1]
            x1, y1, h1 = _advance(x0, y0, h0, kappa, length)
            starts.append((s0 + length, x1, y1, h1))
        object.__setattr__(self, "_starts", tuple(starts))

    @classmethod
    def straight(cls, lane_width: float = 3.5) -> "RoadGeometry":
        return cls(((math.inf, 0.0),), lane_width)

    @classmethod
    def arc(cls, radius: float, lane_width: float = 3.5) -> "RoadGeometry":
        return cls(((math.inf, 1.0 / radius),), lane_width)

    @classmethod
    def piecewise(cls, pieces, lane_width: float = 3.5) -> "RoadGeometry":
        """``pieces`` are ``(length, radius)`` with ``radius=inf`` for straights."""
        segs = tuple((float(length), 0.0 if math.isinf(r) else 1.0 / r) for length, r in pieces)
        return cls(segs, lane_width)

    def poses(self, s, d: float = 0.0):
        """Vectorized :meth:`pose` over an array of arc lengths."""
        s = np.asarray(s, dtype=float)
        starts = np.array([st[0] for st in self._starts])
        idx = np.searchsorted(starts, s, side="right") - 1
        idx = np.clip(idx, 0, len(starts) - 1)
        s0 = starts[idx]
        x0 = np.array([st[1] for st in self._starts])[idx]
        y0 = np.array([st[2] for st in self._starts])[idx]
        h0 = np.array([st[3] for st in self._starts])[idx]
        kappa = np.array([seg[1] for seg in self.segments])[idx]
        u = s - s0
        h = h0 + kappa * u
        curved = kappa != 0.0
        k_safe = np.where(curved, kappa, 1.0)
        x = np.where(curved, x0 + (np.sin(h) - np.sin(h0)) / k_safe, x0 + u * np.cos(h0))
        y = np.where(curved, y0 - (np.cos(h) - np.cos(h0)) / k_safe, y0 + u * np.sin(h0))
        return x - d * np.sin(h), y + d * np.cos(h), h

    def pose(self, s: float, d: float = 0.0) -> tuple[float, float, float]:
        """World ``(X, Y, heading)`` of the point at arc length ``s`` and lateral offset ``d``."""
        idx = 0
        for i, start in enumerate(self._starts):
            if s >= start[0]:
                idx = i
        s0, x0, y0, h0 = self._starts[idx]
        kappa = self.segments[idx][1]
        x, y, h = _advance(x0, y0, h0, kappa, s - s0)
        return x - d * math.sin(h), y + d * math.cos(h), h


def _advance(x0, y0, h0, kappa, u):
    if kappa == 0.0:
        return x0 + u * math.cos(h0), y0 + u * math.sin(h0), h0
    h = h0 + kappa * u
    return x0 + (math.sin(h) - math.sin(h0)) / kappa, y0 - (math.cos(h) - math.cos(h0)) / kappa, h


def to_local(pose, X: float, Y: float) -> tuple[float, float]:
    ex, ey, h = pose
    dx, dy = X - ex, Y - ey
    c, s = math.cos(h), math.sin(h)
    return dx * c + dy * s, -dx * s + dy * c


@dataclass(frozen=True)
class RadarDetection:
    id: int
    r: float
    alpha: float
    rdot: float


@dataclass(frozen=True)
class CartesianDetection:
    id: int
    x: float
    y: float
    v_rel: float


@dataclass(frozen=True)
class LaneLinePoly:
    a0: float
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    valid: bool = True
    view_range: float = 80.0

    @property
    def coeffs(self) -> tuple[float, float, float, float]:
        return self.a0, self.a1, self.a2, self.a3


@dataclass(frozen=True)
class MountingGeometry:
    dx_rc: float = 2.0
    fov_half: float = math.radians(45.0)
    max_range: float = 100.0

    def __post_init__(self):
        if self.dx_rc < 0:
            raise ValueError("dx_rc must be non-negative")
        if not 0 < self.fov_half <= math.pi / 2:
            raise ValueError("fov_half must be in (0, pi/2]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")


@dataclass(frozen=True)
class RadarNoise:
    sigma_r: float = 0.0
    sigma_alpha: float = 0.0


@dataclass(frozen=True)
class VehicleSnapshot:
    """One vehicle on the road; ``s`` is its front-bumper arc length."""

    id: int
    s: float
    v: float
    d: float = 0.0
    length: float = 4.5


def polar_to_cartesian(det: RadarDetection) -> CartesianDetection:
    if det.r <= 0:
        raise ValueError("range must be positive")
    return CartesianDetection(det.id, det.r * math.cos(det.alpha), det.r * math.sin(det.alpha), det.rdot)


def to_camera_frame(c: CartesianDetection, m: MountingGeometry) -> CartesianDetection:
    # the camera sits dx_rc behind the radar on the same longitudinal axis
    return replace(c, x=c.x + m.dx_rc)


def eval_boundary(p: LaneLinePoly, x: float) -> float:
    if not p.valid:
        raise ValueError("lane line is not valid; synthesize boundaries first")
    if not 0.0 <= x <= p.view_range:
        raise ValueError(f"x={x} outside lane line view range [0, {p.view_range}]")
    return p.a0 + x * (p.a1 + x * (p.a2 + x * p.a3))


def _usable(p: LaneLinePoly | None) -> bool:
    return p is not None and p.valid


def synthesize_boundaries(left: LaneLinePoly | None, right: LaneLinePoly | None,
                          lane_width: float) -> tuple[LaneLinePoly, LaneLinePoly]:
    """Fill in missing lane lines.

    One line missing: copy the visible one across the lane.  Both missing:
    assume straight travel and search a lane-wide window centered on the ego.
    """
    if lane_width <= 0:
        raise ValueError("lane_width must be positive")
    has_left, has_right = _usable(left), _usable(right)
    if has_left and has_right:
        return left, right
    if has_left:
        return left, replace(left, a0=left.a0 + lane_width)
    if has_right:
        return replace(right, a0=right.a0 - lane_width), right
    half = lane_width / 2.0
    return (LaneLinePoly(-half, view_range=math.inf), LaneLinePoly(half, view_range=math.inf))


def in_lane_candidates(dets, left, right, m: MountingGeometry, lane_width: float):
    """Camera-frame detections sorted by range, with the boundaries used and an in-lane flag each."""
    lb, rb = synthesize_boundaries(left, right, lane_width)
    limit = min(lb.view_range, rb.view_range)
    cams = sorted((to_camera_frame(polar_to_cartesian(d), m) for d in dets), key=lambda c: (c.x, c.id))
    out = []
    for c in cams:
        inside = False
        if 0.0 <= c.x <= limit:
            inside = eval_boundary(lb, c.x) < c.y < eval_boundary(rb, c.x)
        out.append((c, inside))
    return out, (lb, rb)


def select_in_lane_target(dets, left, right, m: MountingGeometry,
                          lane_width: float) -> CartesianDetection | None:
    """Nearest detection strictly between the lane boundaries, in the camera frame."""
    candidates, _ = in_lane_candidates(dets, left, right, m, lane_width)
    for c, inside in candidates:
        if inside:
            return c
    return None


def simulate_radar(world, ego_id: int, geometry: RoadGeometry, m: MountingGeometry,
                   noise: RadarNoise = RadarNoise(), rng: np.random.Generator | None = None):
    """Polar returns from the rear-bumper centers of the other vehicles."""
    by_id = {veh.id: veh for veh in world}
    ego = by_id[ego_id]
    ego_pose = geometry.pose(ego.s, ego.d)
    ev = (ego.v * math.cos(ego_pose[2]), ego.v * math.sin(ego_pose[2]))
    noisy = noise.sigma_r > 0 or noise.sigma_alpha > 0
    if noisy and rng is None:
        raise ValueError("noisy radar needs an rng")
    dets = []
    for veh in sorted(world, key=lambda w: w.id):
        if veh.id == ego_id:
            continue
        X, Y, h = geometry.pose(veh.s - veh.length, veh.d)
        x, y = to_local(ego_pose, X, Y)
        r = math.hypot(x, y)
        if x <= 0 or r > m.max_range:
            continue
        alpha = math.atan2(y, x)
        if abs(alpha) > m.fov_half:
            continue
        dX, dY = X - ego_pose[0], Y - ego_pose[1]
        rdot = ((veh.v * math.cos(h) - ev[0]) * dX + (veh.v * math.sin(h) - ev[1]) * dY) / r
        if noisy:
            r += rng.normal(0.0, noise.sigma_r)
            alpha += rng.normal(0.0, noise.sigma_alpha)
            r = max(r, 1e-3)
        dets.append(RadarDetection(veh.id, r, alpha, rdot))
    return dets


def boundary_samples(geometry: RoadGeometry, ego: VehicleSnapshot, m: MountingGeometry,
                     offset: float, fit_range: float, spacing: float = 1.0):
    """True boundary points ``(x, y)`` in the camera frame at ``spacing`` over ``[0, fit_range]``."""
    ego_pose = geometry.pose(ego.s, ego.d)
    h = ego_pose[2]
    cam_pose = (ego_pose[0] - m.dx_rc * math.cos(h), ego_pose[1] - m.dx_rc * math.sin(h), h)
    s_cam = ego.s - m.dx_rc
    ss = s_cam - 5.0 + np.arange(0.0, fit_range * 1.6 + 10.0, 0.05)
    X, Y, _ = geometry.poses(ss, offset)
    dX, dY = X - cam_pose[0], Y - cam_pose[1]
    xs = dX * math.cos(h) + dY * math.sin(h)
    ys = -dX * math.sin(h) + dY * math.cos(h)
    # keep the part of the curve where x still increases with s
    stop = np.argmax(np.diff(xs) <= 0) + 1 if np.any(np.diff(xs) <= 0) else len(xs)
    xs, ys = xs[:stop], ys[:stop]
    grid = np.arange(0.0, fit_range + 1e-9, spacing)
    grid = grid[grid <= xs[-1]]
    return grid, np.interp(grid, xs, ys)


def simulate_camera(geometry: RoadGeometry, ego: VehicleSnapshot, m: MountingGeometry,
                    visible=(True, True), fit_range: float = 80.0):
    """Cubic fits of the left/right ego-lane lines; ``None`` for an invisible line."""
    if fit_range <= 0:
        raise ValueError("fit_range must be positive")
    half = geometry.lane_width / 2.0
    out = []
    for offset, vis in ((-half, visible[0]), (half, visible[1])):
        if not vis:
            out.append(None)
            continue
        xs, ys = boundary_samples(geometry, ego, m, offset, fit_range)
        c = np.polynomial.polynomial.polyfit(xs, ys, 3)
        out.append(LaneLinePoly(*(float(v) for v in c), valid=True, view_range=float(xs[-1])))
    return out[0], out[1]


def ground_truth_in_lane(world, ego_id: int, lane_width: float) -> int | None:
    """Nearest vehicle ahead whose lateral offset from the ego-lane centerline is under half a lane."""
    by_id = {veh.id: veh for veh in world}
    ego = by_id[ego_id]
    best = None
    for veh in world:
        if veh.id == ego_id or abs(veh.d) >= lane_width / 2.0:
            continue
        rear = veh.s - veh.length
        if rear <= ego.s:
            continue
        if best is None or rear < best[0]:
            best = (rear, veh.id)
    return None if best is None else best[1]


@dataclass
class PerceptionConfig:
    geometry: RoadGeometry = field(default_factory=RoadGeometry.straight)
    mounting: MountingGeometry = field(default_factory=MountingGeometry)
    noise: RadarNoise = field(default_factory=RadarNoise)
    radar_period: float = 0.05
    camera_period: float = 0.1
    fit_range: float = 80.0
    left_off: tuple = ()  # (start, end) intervals with the left line invisible
    right_off: tuple = ()
    frames: int = 1000

    def visibility(self, t: float) -> tuple[bool, bool]:
        return (not any(a <= t < b for a, b in self.left_off),
                not any(a <= t < b for a, b in self.right_off))


def generate_scenes(n_frames: int, geometry: RoadGeometry, rng: np.random.Generator):
    """Three-vehicle scenes: an in-lane lead, an adjacent-lane car and a far out-of-lane car.

    Returns ``(world, ego_id)`` pairs with the ego as id 0.
    """
    w = geometry.lane_width
    scenes = []
    for _ in range(n_frames):
        s_ego = rng.uniform(0.0, 300.0)
        v_ego = rng.uniform(5.0, 25.0)
        side = rng.choice((-1.0, 1.0))
        world = [
            VehicleSnapshot(0, s_ego, v_ego),
            VehicleSnapshot(1, s_ego + 4.5 + rng.uniform(8.0, 60.0), rng.uniform(5.0, 25.0),
                            d=rng.uniform(-0.4, 0.4)),
            VehicleSnapshot(2, s_ego + 4.5 + rng.uniform(3.0, 70.0), rng.uniform(5.0, 25.0),
                            d=side * w + rng.uniform(-0.3, 0.3)),
            VehicleSnapshot(3, s_ego + 4.5 + rng.uniform(5.0, 70.0), rng.uniform(5.0, 25.0),
                            d=-side * 2.0 * w + rng.uniform(-0.3, 0.3)),
        ]
        scenes.append((world, 0))
    return scenes


@dataclass
class CorpusResult:
    rows: list  # (frame, id, r, alpha, rdot, selected, truth)
    selected: list  # selected id or None per frame
    truth: list

    @property
    def agreement(self) -> float:
        if not self.selected:
            return 1.0
        hits = sum(s == t for s, t in zip(self.selected, self.truth))
        return hits / len(self.selected)


def evaluate_corpus(scenes, cfg: PerceptionConfig, rng: np.random.Generator | None = None,
                    visible=(True, True)) -> CorpusResult:
    """Run radar, camera and selection on every scene and compare with the oracle."""
    geo, mount = cfg.geometry, cfg.mounting
    rows, selected, truth = [], [], []
    for frame, (world, ego_id) in enumerate(scenes):
        ego = next(v for v in world if v.id == ego_id)
        dets = simulate_radar(world, ego_id, geo, mount, cfg.noise, rng)
        left, right = simulate_camera(geo, ego, mount, visible, cfg.fit_range)
        tgt = select_in_lane_target(dets, left, right, mount, geo.lane_width)
        sel = None if tgt is None else tgt.id
        tru = ground_truth_in_lane(world, ego_id, geo.lane_width)
        selected.append(sel)
        truth.append(tru)
        for d in dets:
            rows.append((frame, d.id, d.r, d.alpha, d.rdot, int(d.id == sel), int(d.id == tru)))
    return CorpusResult(rows, selected, truth)


def write_corpus_csv(result: CorpusResult, path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write("frame,id,r,alpha,rdot,selected,truth\n")
        for frame, vid, r, alpha, rdot, sel, tru in result.rows:
            fh.write(f"{frame},{vid},{r:.6f},{alpha:.6f},{rdot:.6f},{sel},{tru}\n")
