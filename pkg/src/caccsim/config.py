"""Scenario files: a strict INI-style format with documented defaults.

Sections: ``[sim]``, ``[lead]``, one or more ``[follower]`` / ``[follower.N]``,
``[channel]``, ``[perception]``, ``[metrics]`` and ``[output]``.  Every key
except ``sim.duration``, ``lead.driver`` and ``follower.mode`` is optional.
Unknown sections or keys are errors.  Lists use ``a:b`` pairs separated by
commas, e.g. ``set_speed = 0:5.556, 25:6.944, 45:0``.
"""

from __future__ import annotations

import configparser
import difflib
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from caccsim.channel import ChannelParams
from caccsim.controller import ControllerConfig, ControllerMode, SpacingPolicy
from caccsim.engine import SimConfig
from caccsim.idm import AccelProfile, IdmParams, SetSpeedSchedule
from caccsim.perception import MountingGeometry, PerceptionConfig, RadarNoise, RoadGeometry
from caccsim.plant import GainScheduledPi, IdealLag, PlantParams


class ConfigError(ValueError):
    """Invalid scenario file; the message names the file, line and key."""


@dataclass(frozen=True)
class LeadConfig:
    driver: str = "idm"
    idm: IdmParams = field(default_factory=IdmParams)
    schedule: SetSpeedSchedule = field(default_factory=lambda: SetSpeedSchedule([(0.0, 5.556)]))
    trace: Path | None = None
    profile: AccelProfile | None = None
    v_init: float = 0.0
    length: float = 4.5


@dataclass(frozen=True)
class FollowerConfig:
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    low_level: object = field(default_factory=IdealLag)
    plant: PlantParams = field(default_factory=PlantParams)
    measurement: str = "truth"
    length: float = 4.5
    initial_gap: float | None = None


@dataclass(frozen=True)
class MetricsConfig:
    window_start: float = 5.0
    norm: str = "Linf"


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    plots: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    lead: LeadConfig = field(default_factory=LeadConfig)
    followers: tuple = (FollowerConfig(),)
    channel: ChannelParams | None = None
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: Path | None = field(default=None, compare=False)

    def with_followers(self, followers) -> "ScenarioConfig":
        return replace(self, followers=tuple(followers))

    def with_mode(self, mode) -> "ScenarioConfig":
        mode = ControllerMode(mode)
        return self.with_followers(
            replace(f, controller=replace(f.controller, mode=mode)) for f in self.followers)

    def with_t_hw(self, t_hw: float) -> "ScenarioConfig":
        return self.with_followers(
            replace(f, controller=replace(f.controller, policy=replace(f.controller.policy, t_hw=t_hw)))
            for f in self.followers)


# ---------------------------------------------------------------- schema

def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _pairs(text, width=2):
    out = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        parts = item.split(":")
        if len(parts) != width:
            raise ValueError(f"expected {width} ':'-separated numbers in {item!r}")
        out.append(tuple(float(p) for p in parts))
    return out


def _intervals(text):
    spans = _pairs(text)
    for a, b in spans:
        if b <= a:
            raise ValueError(f"interval {a}:{b} is empty")
    return tuple(spans)


def _road(text):
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind == "straight" and not rest:
        return ("straight",)
    if kind == "arc":
        return ("arc", float(rest))
    if kind == "piecewise":
        return ("piecewise", tuple(_pairs(rest)))
    raise ValueError("expected 'straight', 'arc:<radius>' or 'piecewise:<len>:<radius>, ...'")


SCHEMA = {
    "sim": {"dt": _float, "duration": _float, "seed": _int},
    "lead": {
        "driver": _choice("idm", "replay", "profile"), "v_init": _float, "length": _float,
        "set_speed": _pairs, "v0": _float, "s0": _float, "T": _float, "a": _float, "b": _float,
        "delta": _float, "b_hard": _float, "trace": str, "accel_profile": _pairs,
    },
    "follower": {
        "mode": _choice("acc", "cacc"), "t_hw": _float, "d0": _float, "w_k": _float, "tau": _float,
        "a_min": _float, "a_max": _float, "cruise_speed": _float,
        "low_level": _choice("ideal_lag", "pi"), "lag_tau": _float,
        "pi_schedule": lambda t: _pairs(t, 3), "integrator_limit": _float,
        "mass": _float, "drag_coeff": _float, "rolling_coeff": _float, "g": _float,
        "actuator_lag": _float, "force_min": _float, "force_max": _float,
        "measurement": _choice("truth", "perception"), "length": _float, "initial_gap": _float,
    },
    "channel": {"period": _float, "latency": _float, "jitter": _float, "loss_prob": _float,
                "stale_timeout": _float},
    "perception": {
        "road": _road, "lane_width": _float, "dx_rc": _float, "fov_half_deg": _float,
        "max_range": _float, "sigma_r": _float, "sigma_alpha_deg": _float, "radar_period": _float,
        "camera_period": _float, "fit_range": _float, "left_off": _intervals, "right_off": _intervals,
        "frames": _int,
    },
    "metrics": {"window_start": _float, "norm": _choice("Linf", "L2")},
    "output": {"dir": str, "plots": _bool},
}
REQUIRED = {"sim": ("duration",), "lead": ("driver",), "follower": ("mode",)}
_FOLLOWER_RE = re.compile(r"^follower(?:\.(\d+))?$")


def _schema_name(section: str) -> str | None:
    if _FOLLOWER_RE.match(section):
        return "follower"
    return section if section in SCHEMA else None


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` and ``(section, None) -> header line``."""
    index, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = no
            continue
        key = line.split("=", 1)[0].strip()
        if section is not None:
            index.setdefault((section, key), no)
    return index


class _Reader:
    def __init__(self, path: Path, text: str):
        self.path = path
        self.lines = _line_index(text)
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                            interpolation=None, delimiters=("=",))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def fail(self, section, key, msg):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        where = f"{self.path}:{line}" if line else str(self.path)
        what = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{where}: {what}: {msg}")

    def section(self, section):
        """Parsed values of one section, keyed by option name."""
        schema = SCHEMA[_schema_name(section)]
        values = {}
        for key, text in self.cp.items(section):
            if key not in schema:
                hint = difflib.get_close_matches(key, list(schema), n=1, cutoff=0.5)
                suggestion = f" (did you mean '{hint[0]}'?)" if hint else ""
                self.fail(section, key, f"unknown key{suggestion}")
            try:
                values[key] = schema[key](text.strip())
            except ValueError as exc:
                self.fail(section, key, f"bad value {text.strip()!r}: {exc}")
        for key in REQUIRED.get(_schema_name(section), ()):
            if key not in values:
                self.fail(section, key, "missing required key")
        return values

    def build(self, section, key, factory):
        try:
            return factory()
        except ValueError as exc:
            self.fail(section, key, str(exc))


def _resolve_trace(name: str, base: Path) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = base / path
    if path.exists():
        return path
    bundled = resources.files("caccsim") / "data" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(name)


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario: {exc.strerror or exc}") from None
    return parse_scenario_text(text, path)


def parse_scenario_text(text: str, path: Path = Path("<scenario>")) -> ScenarioConfig:
    rd = _Reader(path, text)
    for sec in rd.cp.sections():
        if _schema_name(sec) is None:
            hint = difflib.get_close_matches(sec, list(SCHEMA), n=1)
            rd.fail(sec, None, "unknown section" + (f" (did you mean '{hint[0]}'?)" if hint else ""))
    for sec in ("sim", "lead"):
        if not rd.cp.has_section(sec):
            raise ConfigError(f"{path}: missing required section [{sec}]")

    s = rd.section("sim")
    sim = rd.build("sim", None, lambda: SimConfig(**s))

    lead = _lead(rd, rd.section("lead"), path.parent)

    fsecs = [sec for sec in rd.cp.sections() if _FOLLOWER_RE.match(sec)]
    if not fsecs:
        raise ConfigError(f"{path}: at least one [follower] section is required")
    fsecs.sort(key=lambda sec: int(_FOLLOWER_RE.match(sec).group(1) or 0))
    followers = []
    for sec in fsecs:
        f = _follower(rd, sec, rd.section(sec))
        # the policy's vehicle length is that of the target ahead
        ahead = followers[-1].length if followers else lead.length
        pol = replace(f.controller.policy, l=ahead)
        followers.append(replace(f, controller=replace(f.controller, policy=pol)))
    followers = tuple(followers)

    channel = None
    if rd.cp.has_section("channel"):
        c = rd.section("channel")
        channel = rd.build("channel", None, lambda: ChannelParams(**c))
    for sec, f in zip(fsecs, followers):
        if f.controller.mode is ControllerMode.CACC and channel is None:
            rd.fail(sec, "mode", "cacc mode requires a [channel] section")

    perception = PerceptionConfig()
    if rd.cp.has_section("perception"):
        perception = _perception(rd, rd.section("perception"))
    metrics = MetricsConfig(**rd.section("metrics")) if rd.cp.has_section("metrics") else MetricsConfig()
    output = OutputConfig(**rd.section("output")) if rd.cp.has_section("output") else OutputConfig()
    return ScenarioConfig(sim, lead, followers, channel, perception, metrics, output, source=path)


def _lead(rd, v, base):
    idm_keys = ("v0", "s0", "T", "a", "b", "delta", "b_hard")
    idm = rd.build("lead", None, lambda: IdmParams(**{k: v[k] for k in idm_keys if k in v}))
    schedule = LeadConfig().schedule
    if "set_speed" in v:
        schedule = rd.build("lead", "set_speed", lambda: SetSpeedSchedule(v["set_speed"]))
    trace = None
    if v["driver"] == "replay":
        if "trace" not in v:
            rd.fail("lead", "trace", "replay driver needs a trace file")
        try:
            trace = _resolve_trace(v["trace"], base)
        except FileNotFoundError:
            rd.fail("lead", "trace", f"trace file {v['trace']!r} not found")
    profile = None
    if v["driver"] == "profile":
        if "accel_profile" not in v:
            rd.fail("lead", "accel_profile", "profile driver needs accel_profile")
        profile = rd.build("lead", "accel_profile", lambda: AccelProfile(v["accel_profile"]))
    length = v.get("length", 4.5)
    if length <= 0:
        rd.fail("lead", "length", "must be positive")
    v_init = v.get("v_init", 0.0)
    if v_init < 0:
        rd.fail("lead", "v_init", "must be non-negative")
    return LeadConfig(v["driver"], idm, schedule, trace, profile, v_init, length)


def _follower(rd, sec, v):
    base = ControllerConfig()
    policy = rd.build(sec, None, lambda: SpacingPolicy(
        t_hw=v.get("t_hw", base.policy.t_hw), d0=v.get("d0", base.policy.d0)))
    ctrl = rd.build(sec, None, lambda: ControllerConfig(
        policy=policy, w_k=v.get("w_k", base.w_k), tau=v.get("tau", base.tau),
        mode=ControllerMode(v["mode"]), a_min=v.get("a_min", base.a_min),
        a_max=v.get("a_max", base.a_max), cruise_speed=v.get("cruise_speed", base.cruise_speed)))
    plant_keys = ("mass", "drag_coeff", "rolling_coeff", "g", "actuator_lag", "force_min", "force_max")
    plant = rd.build(sec, None, lambda: PlantParams(**{k: v[k] for k in plant_keys if k in v}))
    if v.get("low_level", "ideal_lag") == "pi":
        kw = {}
        if "pi_schedule" in v:
            kw["schedule"] = tuple(v["pi_schedule"])
        if "integrator_limit" in v:
            kw["integrator_limit"] = v["integrator_limit"]
        low = rd.build(sec, "pi_schedule", lambda: GainScheduledPi(**kw))
    else:
        low = rd.build(sec, "lag_tau", lambda: IdealLag(v.get("lag_tau", 0.4)))
    return FollowerConfig(ctrl, low, plant, v.get("measurement", "truth"),
                          v.get("length", 4.5), v.get("initial_gap"))


def _perception(rd, v):
    base = PerceptionConfig()
    width = v.get("lane_width", base.geometry.lane_width)
    road = v.get("road", ("straight",))

    def geometry():
        if road[0] == "straight":
            return RoadGeometry.straight(width)
        if road[0] == "arc":
            return RoadGeometry.arc(road[1], width)
        return RoadGeometry.piecewise(road[1], width)

    geo = rd.build("perception", "road", geometry)
    mount = rd.build("perception", None, lambda: MountingGeometry(
        dx_rc=v.get("dx_rc", base.mounting.dx_rc),
        fov_half=math.radians(v["fov_half_deg"]) if "fov_half_deg" in v else base.mounting.fov_half,
        max_range=v.get("max_range", base.mounting.max_range)))
    noise = RadarNoise(v.get("sigma_r", 0.0), math.radians(v.get("sigma_alpha_deg", 0.0)))
    return PerceptionConfig(geo, mount, noise,
                            radar_period=v.get("radar_period", base.radar_period),
                            camera_period=v.get("camera_period", base.camera_period),
                            fit_range=v.get("fit_range", base.fit_range),
                            left_off=v.get("left_off", ()), right_off=v.get("right_off", ()),
                            frames=v.get("frames", base.frames))


# ---------------------------------------------------------------- emission

def _fmt_pairs(pairs):
    return ", ".join(":".join(repr(float(x)) for x in p) for p in pairs)


def _fmt_road(geo: RoadGeometry):
    if len(geo.segments) == 1:
        kappa = geo.segments[0][1]
        return "straight" if kappa == 0 else f"arc:{1.0 / kappa!r}"
    pieces = [(length, math.inf if k == 0 else 1.0 / k) for length, k in geo.segments]
    return "piecewise:" + _fmt_pairs(pieces)


def emit_config(cfg: ScenarioConfig) -> str:
    """Render ``cfg`` in the scenario format; ``parse`` of the result gives back ``cfg``."""
    out = ["[sim]", f"dt = {cfg.sim.dt!r}", f"duration = {cfg.sim.duration!r}", f"seed = {cfg.sim.seed}", ""]
    ld = cfg.lead
    out += ["[lead]", f"driver = {ld.driver}", f"v_init = {ld.v_init!r}", f"length = {ld.length!r}",
            f"set_speed = {_fmt_pairs(ld.schedule.points)}"]
    for k in ("v0", "s0", "T", "a", "b", "delta", "b_hard"):
        out.append(f"{k} = {getattr(ld.idm, k)!r}")
    if ld.trace is not None:
        out.append(f"trace = {ld.trace}")
    if ld.profile is not None:
        out.append(f"accel_profile = {_fmt_pairs(ld.profile.points)}")
    out.append("")
    for i, f in enumerate(cfg.followers, start=1):
        c = f.controller
        out += [f"[follower.{i}]", f"mode = {c.mode.value}", f"t_hw = {c.policy.t_hw!r}",
                f"d0 = {c.policy.d0!r}", f"w_k = {c.w_k!r}", f"tau = {c.tau!r}",
                f"a_min = {c.a_min!r}", f"a_max = {c.a_max!r}", f"cruise_speed = {c.cruise_speed!r}"]
        if isinstance(f.low_level, GainScheduledPi):
            out += ["low_level = pi", f"pi_schedule = {_fmt_pairs(f.low_level.schedule)}",
                    f"integrator_limit = {f.low_level.integrator_limit!r}"]
        else:
            out += ["low_level = ideal_lag", f"lag_tau = {f.low_level.tau!r}"]
        for k in ("mass", "drag_coeff", "rolling_coeff", "g", "actuator_lag", "force_min", "force_max"):
            out.append(f"{k} = {getattr(f.plant, k)!r}")
        out += [f"measurement = {f.measurement}", f"length = {f.length!r}"]
        if f.initial_gap is not None:
            out.append(f"initial_gap = {f.initial_gap!r}")
        out.append("")
    if cfg.channel is not None:
        ch = cfg.channel
        out += ["[channel]"] + [f"{k} = {getattr(ch, k)!r}" for k in
                                ("period", "latency", "jitter", "loss_prob", "stale_timeout")] + [""]
    p = cfg.perception
    out += ["[perception]", f"road = {_fmt_road(p.geometry)}", f"lane_width = {p.geometry.lane_width!r}",
            f"dx_rc = {p.mounting.dx_rc!r}", f"fov_half_deg = {math.degrees(p.mounting.fov_half)!r}",
            f"max_range = {p.mounting.max_range!r}", f"sigma_r = {p.noise.sigma_r!r}",
            f"sigma_alpha_deg = {math.degrees(p.noise.sigma_alpha)!r}",
            f"radar_period = {p.radar_period!r}", f"camera_period = {p.camera_period!r}",
            f"fit_range = {p.fit_range!r}", f"frames = {p.frames}"]
    if p.left_off:
        out.append(f"left_off = {_fmt_pairs(p.left_off)}")
    if p.right_off:
        out.append(f"right_off = {_fmt_pairs(p.right_off)}")
    out += ["", "[metrics]", f"window_start = {cfg.metrics.window_start!r}", f"norm = {cfg.metrics.norm}",
            "", "[output]", f"dir = {cfg.output.dir}", f"plots = {str(cfg.output.plots).lower()}", ""]
    return "\n".join(out)


def default_config() -> ScenarioConfig:
    return ScenarioConfig(channel=ChannelParams())


def emit_default_config() -> str:
    return emit_config(default_config())


def bundled_scenarios() -> list[str]:
    root = resources.files("caccsim") / "data"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("caccsim") / "data" / name))
