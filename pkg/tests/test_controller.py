import numpy as np
import pytest
from hypothesis import given, strategies as st

from caccsim.channel import ChannelParams
from caccsim.config import FollowerConfig, LeadConfig, ScenarioConfig
from caccsim.controller import (
    ControllerConfig,
    ControllerMode,
    FeedforwardFilter,
    SpacingPolicy,
    UpperController,
    UpperGains,
    desired_spacing,
    feedforward_step,
    gains_from_bandwidth,
    pd_command,
    spacing_error,
    spacing_error_rate,
    upper_controller,
)
from caccsim.engine import SimConfig, run_scenario
from caccsim.idm import AccelProfile

DT = 0.01
finite = st.floats(-50, 50)


def test_desired_spacing_examples():
    assert desired_spacing(10, SpacingPolicy(t_hw=1, d0=3)) == 13
    assert desired_spacing(0, SpacingPolicy(t_hw=1, d0=3)) == 3
    assert desired_spacing(25 / 3.6, SpacingPolicy(t_hw=0.6, d0=3)) == pytest.approx(7.1667, abs=1e-4)


@pytest.mark.parametrize("gap,expected", [(13, 0), (20, 7), (10, -3)])
def test_spacing_error_sign(gap, expected):
    assert spacing_error(gap, 10, SpacingPolicy(t_hw=1, d0=3)) == pytest.approx(expected)


@pytest.mark.parametrize("v_rel,a_host,t_hw,expected", [(0, 0, 1, 0), (2, 1, 0.6, 1.4), (-1, 0, 1, -1)])
def test_spacing_error_rate(v_rel, a_host, t_hw, expected):
    assert spacing_error_rate(v_rel, a_host, SpacingPolicy(t_hw=t_hw)) == pytest.approx(expected)


def test_pd_examples():
    g = gains_from_bandwidth(1.0)
    assert pd_command(0, 0, g) == 0
    assert pd_command(2, -0.5, g) == pytest.approx(1.5)


@given(finite, finite, st.floats(-10, 10), st.floats(0.1, 5))
def test_pd_is_linear(e, e_dot, scale, w_k):
    g = gains_from_bandwidth(w_k)
    assert pd_command(scale * e, scale * e_dot, g) == pytest.approx(scale * pd_command(e, e_dot, g),
                                                                   rel=1e-9, abs=1e-9)


@given(st.floats(0.01, 10))
def test_pd_zero_at_equilibrium(w_k):
    assert pd_command(0.0, 0.0, gains_from_bandwidth(w_k)) == 0.0


def test_gain_rule():
    assert gains_from_bandwidth(1.0) == UpperGains(w_k=1.0, k_p=1.0, k_d=1.0)
    assert gains_from_bandwidth(2.0) == UpperGains(w_k=2.0, k_p=4.0, k_d=2.0)
    with pytest.raises(ValueError):
        gains_from_bandwidth(0.0)


def _step_response(tau, t_hw, n):
    filt = FeedforwardFilter(tau, t_hw)
    return np.array([feedforward_step(1.0, filt, DT) for _ in range(n)])


def test_feedforward_step_matches_analytic_response():
    out = _step_response(0.4, 1.0, 1001)
    t = np.arange(out.size) * DT
    analytic = 1.0 + (0.4 - 1.0) * np.exp(-t)
    assert out[0] == pytest.approx(0.4)
    assert out[100] == pytest.approx(0.7793, abs=1e-4)
    assert np.max(np.abs(out - analytic)) < 5 * DT / 1.0


def test_feedforward_dc_gain():
    out = _step_response(0.4, 1.0, int(round(20 / DT)) + 1)
    assert abs(out[-1] - 1.0) < 1e-6


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50), st.floats(0.1, 3))
def test_feedforward_passthrough_when_tau_equals_headway(inputs, t_hw):
    filt = FeedforwardFilter(t_hw, t_hw)
    for u in inputs:
        assert abs(filt.step(u, DT) - u) < 1e-9


def test_feedforward_reset():
    filt = FeedforwardFilter(0.4, 1.0)
    filt.step(1.0, DT)
    filt.reset()
    assert filt.step(0.0, DT) == 0.0


def test_zero_state_gives_zero_command_in_both_modes():
    cfg = ControllerConfig()
    for mode in ControllerMode:
        assert upper_controller(13.0, 0.0, 10.0, 0.0, 0.0, mode, cfg) == 0.0


@given(st.lists(st.tuples(st.floats(1, 80), st.floats(-5, 5), st.floats(0, 30), st.floats(-3, 2)),
                min_size=1, max_size=30))
def test_acc_and_cacc_agree_with_zero_feedforward(states):
    acc = UpperController(ControllerConfig(mode=ControllerMode.ACC), DT)
    cacc = UpperController(ControllerConfig(mode=ControllerMode.CACC), DT)
    for gap, v_rel, v, a in states:
        assert acc.step(gap, v_rel, v, a, 0.0).a_des == cacc.step(gap, v_rel, v, a, 0.0).a_des


def test_command_saturates():
    cfg = ControllerConfig()
    assert upper_controller(200.0, 5.0, 10.0, 0.0, None, "acc", cfg) == cfg.a_max
    assert upper_controller(1.0, -10.0, 10.0, 0.0, None, "acc", cfg) == cfg.a_min


def test_missing_target_switches_to_speed_hold():
    ctrl = UpperController(ControllerConfig(cruise_speed=20.0), DT)
    cmd = ctrl.step(None, None, 19.0, 0.0, None)
    assert cmd.e is None
    assert cmd.a_des == pytest.approx(1.0)


def test_stale_feedforward_feeds_zero():
    ctrl = UpperController(ControllerConfig(mode=ControllerMode.CACC), DT)
    ctrl.step(13.0, 0.0, 10.0, 0.0, 1.0)
    held = ctrl.filter.state
    ctrl.step(13.0, 0.0, 10.0, 0.0, None)
    assert ctrl.filter.state < held


def _lead_step_scenario(mode, **follower):
    lead = LeadConfig(driver="profile", profile=AccelProfile([(5.0, 1.0)]), v_init=15.0)
    fol = FollowerConfig(controller=ControllerConfig(mode=ControllerMode(mode)), **follower)
    return ScenarioConfig(sim=SimConfig(duration=10.0), lead=lead, followers=(fol,),
                          channel=ChannelParams())


def _rise_time(trace, level=0.3):
    a_des = trace.column(1, "a_des")
    return trace.t[np.argmax(a_des >= level)]


def test_cacc_command_rises_before_acc():
    acc = run_scenario(_lead_step_scenario("acc"))
    cacc = run_scenario(_lead_step_scenario("cacc"))
    t_acc, t_cacc = _rise_time(acc), _rise_time(cacc)
    # first broadcast carrying the step leaves at 5.1 s and lands 20 ms later
    arrival = 5.1 + ChannelParams().latency
    assert t_cacc <= arrival + DT + 1e-9
    assert t_cacc < t_acc


def test_closed_loop_settles_behind_constant_speed_lead():
    lead = LeadConfig(driver="profile", profile=AccelProfile([]), v_init=20.0)
    fol = FollowerConfig(initial_gap=35.0)
    trace = run_scenario(ScenarioConfig(sim=SimConfig(duration=40.0), lead=lead, followers=(fol,)))
    assert abs(trace.column(1, "e")[-1]) < 0.05


def test_mode_equivalence_in_closed_loop():
    lead = LeadConfig(driver="profile", profile=AccelProfile([]), v_init=20.0)
    base = ScenarioConfig(sim=SimConfig(duration=30.0), lead=lead,
                          followers=(FollowerConfig(initial_gap=30.0),), channel=ChannelParams())
    acc, cacc = run_scenario(base), run_scenario(base.with_mode("cacc"))
    for name in ("x", "v", "a", "a_des", "gap", "e"):
        assert np.max(np.abs(acc.column(1, name) - cacc.column(1, name))) < 1e-12


@pytest.mark.parametrize("kwargs", [{"tau": 0}, {"a_min": 1}, {"a_max": -1}, {"w_k": -1}])
def test_controller_config_validated(kwargs):
    with pytest.raises(ValueError):
        ControllerConfig(**kwargs)


@pytest.mark.parametrize("kwargs", [{"t_hw": -1}, {"d0": 0}, {"l": 0}])
def test_spacing_policy_validated(kwargs):
    with pytest.raises(ValueError):
        SpacingPolicy(**kwargs)
