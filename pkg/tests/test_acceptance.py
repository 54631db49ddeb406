"""Acceptance gate: one PASS/FAIL line per criterion, tolerances as pinned by the build contract.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from caccsim import cli
from caccsim.channel import ChannelParams
from caccsim.config import bundled_path, parse_scenario
from caccsim.controller import FeedforwardFilter
from caccsim.engine import follow_constant_leader, run_scenario
from caccsim.idm import IdmParams, idm_acceleration, idm_equilibrium_gap
from caccsim.metrics import amplification_ratios, collision_and_min_gap, headway_rmse, max_abs_spacing_error
from caccsim.perception import (
    LaneLinePoly,
    MountingGeometry,
    PerceptionConfig,
    RadarDetection,
    RadarNoise,
    RoadGeometry,
    evaluate_corpus,
    generate_scenes,
    in_lane_candidates,
    eval_boundary,
    polar_to_cartesian,
    select_in_lane_target,
)

DT = 0.01
WINDOW = 5.0  # default metrics window start


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, detail
    return emit


def _compare(name):
    cfg = parse_scenario(bundled_path(name))
    start = time.perf_counter()
    runs = {mode: run_scenario(cfg.with_mode(mode)).rounded(6) for mode in ("acc", "cacc")}
    return cfg, runs, time.perf_counter() - start


def _metrics(cfg, trace):
    pol = cfg.followers[0].controller.policy
    return {
        "rmse": headway_rmse(trace, pol.t_hw, start=WINDOW),
        "net_rmse": headway_rmse(trace, pol.t_hw, start=WINDOW, standstill=pol.d0),
        "max_e": max_abs_spacing_error(trace, start=WINDOW),
        "min_gap": collision_and_min_gap(trace)[1],
        "collided": trace.collided,
    }


def test_criterion_1_idm_lead_one_second_headway(verdict):
    cfg, runs, elapsed = _compare("paper_idm_1s.cfg")
    acc, cacc = (_metrics(cfg, runs[m]) for m in ("acc", "cacc"))
    safe = all(not m["collided"] and m["min_gap"] > 0.5 for m in (acc, cacc))
    ordered = cacc["rmse"] <= 0.7 * acc["rmse"]
    detail = (f"min gap ACC {acc['min_gap']:.3f} m, CACC {cacc['min_gap']:.3f} m; "
              f"headway RMSE ACC {acc['rmse']:.4f} s, CACC {cacc['rmse']:.4f} s "
              f"(ratio {cacc['rmse'] / acc['rmse']:.3f}, need <= 0.7); "
              f"net of standstill ACC {acc['net_rmse']:.4f} s, CACC {cacc['net_rmse']:.4f} s; "
              f"runtime {elapsed:.2f} s")
    verdict(1, safe and ordered and elapsed < 5.0, detail)


def test_criterion_2_urban_replay_short_headway(verdict):
    cfg, runs, elapsed = _compare("paper_urban_0p6s.cfg")
    acc, cacc = (_metrics(cfg, runs[m]) for m in ("acc", "cacc"))
    ok = (cacc["max_e"] <= acc["max_e"] and cacc["rmse"] < acc["rmse"] and elapsed < 5.0
          and not acc["collided"] and not cacc["collided"])
    detail = (f"max |e| ACC {acc['max_e']:.3f} m, CACC {cacc['max_e']:.3f} m; "
              f"headway RMSE ACC {acc['rmse']:.4f} s, CACC {cacc['rmse']:.4f} s; "
              f"net of standstill ACC {acc['net_rmse']:.4f} s, CACC {cacc['net_rmse']:.4f} s; "
              f"runtime {elapsed:.2f} s")
    verdict(2, ok, detail)


def test_criterion_3_string_behavior(verdict):
    cfg = parse_scenario(bundled_path("chain.cfg"))
    chain = cfg.with_followers([cfg.followers[0]] * 5)
    start = time.perf_counter()
    ratios = {m: amplification_ratios(run_scenario(chain.with_mode(m)), "Linf", WINDOW) for m in ("acc", "cacc")}
    elapsed = time.perf_counter() - start
    ok = (len(ratios["cacc"]) == 4 and max(ratios["cacc"]) <= 1.02 and max(ratios["acc"]) > 1.0
          and elapsed < 10.0)
    fmt = lambda rs: ", ".join(f"{r:.3f}" for r in rs)
    verdict(3, ok, f"CACC [{fmt(ratios['cacc'])}] (all <= 1.02); ACC [{fmt(ratios['acc'])}] "
                   f"(some > 1.0); runtime {elapsed:.2f} s")


def test_criterion_4_feedforward_filter(verdict):
    tau, t_hw = 0.4, 1.0
    filt = FeedforwardFilter(tau, t_hw)
    n = int(round(20 * t_hw / DT)) + 1
    out = np.array([filt.step(1.0, DT) for _ in range(n)])
    t = np.arange(n) * DT
    analytic = 1.0 + (tau - t_hw) * np.exp(-t / t_hw)
    shape_err = float(np.max(np.abs(out - analytic)))
    dc_err = abs(out[-1] - 1.0)
    passthrough = FeedforwardFilter(t_hw, t_hw)
    rng = np.random.default_rng(4)
    pass_err = max(abs(passthrough.step(u, DT) - u) for u in rng.normal(0, 2, 1000))
    ok = shape_err < 5 * DT / t_hw and dc_err < 1e-6 and pass_err < 1e-9
    verdict(4, ok, f"step error {shape_err:.2e} (< {5 * DT / t_hw:.2e}); DC error {dc_err:.2e} (< 1e-6); "
                   f"passthrough error {pass_err:.2e} (< 1e-9)")


def test_criterion_5_idm_equilibrium(verdict):
    from scipy.optimize import brentq

    p = IdmParams()
    worst_sim, worst_root, parts = 0.0, 0.0, []
    for v in (2.0, 5.556, 10.0, 20.0):
        closed = idm_equilibrium_gap(v, p)
        root = brentq(lambda s: idm_acceleration(v, s, 0.0, p), 1e-3, 1e3, xtol=1e-12)
        gap, _ = follow_constant_leader(v, p, gap0=1.5 * closed, v_init=0.8 * v)
        rel = abs(gap[-1] - closed) / closed
        worst_sim = max(worst_sim, rel)
        worst_root = max(worst_root, abs(root - closed) / closed)
        parts.append(f"v={v:g}: s_eq {closed:.4f} m, simulated {gap[-1]:.4f} m")
    ok = worst_sim <= 0.005 and worst_root < 1e-9
    verdict(5, ok, "; ".join(parts) + f"; worst simulated error {worst_sim:.2e} (<= 5e-3), "
                                      f"closed form vs root {worst_root:.1e}")


def test_criterion_6_perception_exactness(verdict):
    worst = 0.0
    for r in np.arange(1.0, 151.0):
        for deg in np.arange(-45.0, 45.5, 0.5):
            alpha = math.radians(deg)
            c = polar_to_cartesian(RadarDetection(0, r, alpha, 0.0))
            worst = max(worst, abs(math.hypot(c.x, c.y) - r), abs(math.atan2(c.y, c.x) - alpha))

    m, rng = MountingGeometry(), np.random.default_rng(6)
    sound = True
    for _ in range(10_000):
        dets = [RadarDetection(i, rng.uniform(1, 120), rng.uniform(-0.8, 0.8), 0.0)
                for i in range(rng.integers(0, 8))]
        left = LaneLinePoly(*(rng.normal(0, [1, 0.02, 1e-3, 1e-5]) - [1.75, 0, 0, 0]), valid=rng.random() > 0.2)
        right = LaneLinePoly(*(rng.normal(0, [1, 0.02, 1e-3, 1e-5]) + [1.75, 0, 0, 0]), valid=rng.random() > 0.2)
        chosen = select_in_lane_target(dets, left, right, m, 3.5)
        cands, (lb, rb) = in_lane_candidates(dets, left, right, m, 3.5)
        inside = [c for c, ok in cands if ok]
        if chosen is None:
            sound &= not inside
        else:
            sound &= eval_boundary(lb, chosen.x) < chosen.y < eval_boundary(rb, chosen.x)
            sound &= all(c.x >= chosen.x for c in inside)

    rates = {}
    for label, geo in (("straight", RoadGeometry.straight()), ("R=250 arc", RoadGeometry.arc(250.0)),
                       ("R=-250 arc", RoadGeometry.arc(-250.0))):
        scenes = generate_scenes(1000, geo, np.random.default_rng(60))
        rates[label] = evaluate_corpus(scenes, PerceptionConfig(geometry=geo)).agreement
        noisy = PerceptionConfig(geometry=geo, noise=RadarNoise(0.25, math.radians(0.5)))
        rates[label + " noisy"] = evaluate_corpus(scenes, noisy, np.random.default_rng(61)).agreement
    clean_ok = all(v == 1.0 for k, v in rates.items() if "noisy" not in k)
    noisy_ok = all(v >= 0.95 for k, v in rates.items() if "noisy" in k)
    ok = worst < 1e-12 and sound and clean_ok and noisy_ok
    verdict(6, ok, f"round trip {worst:.1e} (< 1e-12); soundness on 10000 frames {sound}; agreement "
                   + ", ".join(f"{k} {v:.3f}" for k, v in rates.items()))


def test_criterion_7_fallback_equivalence(verdict):
    geo = RoadGeometry.straight()
    scenes = generate_scenes(1000, geo, np.random.default_rng(70))
    cfg = PerceptionConfig(geometry=geo)
    full = evaluate_corpus(scenes, cfg).selected
    left_hidden = evaluate_corpus(scenes, cfg, visible=(False, True)).selected
    same = sum(a == b for a, b in zip(full, left_hidden)) / len(full)
    verdict(7, same == 1.0, f"identical selections in {same:.1%} of {len(full)} frames")


def test_criterion_8_fail_functional_channel(verdict):
    cfg = parse_scenario(bundled_path("paper_idm_1s.cfg"))
    lossy = dataclasses.replace(cfg, channel=dataclasses.replace(cfg.channel, loss_prob=1.0))
    acc, cacc = run_scenario(lossy.with_mode("acc")), run_scenario(lossy.with_mode("cacc"))
    after = acc.t > lossy.channel.stale_timeout
    worst = max(float(np.max(np.abs(acc.column(i, s)[after] - cacc.column(i, s)[after])))
                for i in range(acc.n_vehicles) for s in ("x", "v", "a"))
    worst = max(worst, float(np.max(np.abs(acc.column(1, "a_des") - cacc.column(1, "a_des"))[after])))
    ok = len(acc.records) == len(cacc.records) and worst <= 1e-9
    verdict(8, ok, f"max |CACC - ACC| after {lossy.channel.stale_timeout} s: {worst:.1e} (<= 1e-9)")


def test_criterion_9_determinism(verdict, tmp_path):
    outs = [tmp_path / "first", tmp_path / "second"]
    codes = [cli.main(["--quiet", "--seed", "7", "compare", "paper_idm_1s.cfg", "--out", str(o)]) for o in outs]
    files = sorted(p.name for p in outs[0].iterdir() if p.suffix in (".csv", ".svg"))
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files]
    ok = codes == [0, 0] and len(files) == 5 and all(same)
    verdict(9, ok, f"{sum(same)}/{len(files)} files byte-identical: {', '.join(files)}")
