import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from caccsim.engine import Trace, TraceRecord, VehicleSignals
from caccsim.metrics import (
    amplification_ratios,
    collision_and_min_gap,
    headway_rmse,
    max_abs_spacing_error,
    ratio_of_norms,
    report,
    settle_time,
    time_headway,
)


def make_trace(followers, dt=0.1, collided=False):
    """Trace with a trivial lead and followers given as dicts of equal-length signal lists."""
    n = len(next(iter(followers[0].values())))
    records = []
    for k in range(n):
        row = [VehicleSignals(0.0, 10.0, 0.0)]
        for sig in followers:
            row.append(VehicleSignals(0.0, sig.get("v", [10.0] * n)[k], 0.0, 0.0,
                                      sig.get("gap", [13.0] * n)[k], sig.get("h", [None] * n)[k],
                                      sig.get("e", [0.0] * n)[k]))
        records.append(TraceRecord(k * dt, tuple(row)))
    return Trace(dt, records, collided)


@pytest.mark.parametrize("gap,v,h", [(13, 10, 1.3), (6, 6, 1.0), (3, 0.5, None)])
def test_time_headway(gap, v, h):
    assert time_headway(gap, v) == (None if h is None else pytest.approx(h))


@pytest.mark.parametrize("h,expected", [([1.2] * 4, 0.2), ([1.0] * 4, 0.0), ([0.9, 1.1] * 3, 0.1)])
def test_headway_rmse_examples(h, expected):
    assert headway_rmse(make_trace([{"h": h}]), 1.0) == pytest.approx(expected)


def test_headway_rmse_skips_undefined_samples_and_needs_one():
    assert headway_rmse(make_trace([{"h": [None, 1.5, None]}]), 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        headway_rmse(make_trace([{"h": [None, None]}]), 1.0)


def test_headway_rmse_net_of_standstill():
    # gap = v * 1.0 + 3 exactly: raw headway is off target, the net one is on it
    v = [5.0, 10.0, 20.0]
    gap = [x + 3.0 for x in v]
    trace = make_trace([{"v": v, "gap": gap, "h": [g / s for g, s in zip(gap, v)]}])
    assert headway_rmse(trace, 1.0) > 0.1
    assert headway_rmse(trace, 1.0, standstill=3.0) == pytest.approx(0.0, abs=1e-15)


@given(st.lists(st.floats(0.2, 3.0), min_size=1, max_size=20), st.floats(0.2, 3.0))
def test_headway_rmse_zero_iff_on_target(h, target):
    rmse = headway_rmse(make_trace([{"h": h}]), target)
    assert (rmse == 0.0) == all(x == target for x in h)


def test_amplification_examples():
    e = [0.0, 0.5, -1.0, 0.25]
    assert amplification_ratios(make_trace([{"e": e}, {"e": e}])) == [1.0]
    assert amplification_ratios(make_trace([{"e": e}, {"e": [0.0] * 4}])) == [0.0]
    assert amplification_ratios(make_trace([{"e": e}, {"e": [2 * x for x in e]}]), norm="L2") == [2.0]
    assert ratio_of_norms([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert ratio_of_norms([0.0], [1.0]) == math.inf
    with pytest.raises(ValueError):
        amplification_ratios(make_trace([{"e": e}]))


signal = st.lists(st.floats(-5, 5), min_size=3, max_size=30)


@given(signal, signal, st.integers(0, 10), st.floats(0.1, 10), st.sampled_from(["Linf", "L2"]))
def test_ratio_shift_invariance_and_homogeneity(up, down, shift, scale, norm):
    n = min(len(up), len(down))
    up, down = np.array(up[:n]), np.array(down[:n])
    pad = np.zeros(shift)
    base = ratio_of_norms(up, down, norm)
    assert ratio_of_norms(np.r_[pad, up], np.r_[pad, down], norm) == pytest.approx(base)
    if math.isfinite(base):
        assert ratio_of_norms(up, scale * down, norm) == pytest.approx(scale * base, rel=1e-9, abs=1e-12)


def test_collision_and_min_gap():
    assert collision_and_min_gap(make_trace([{"gap": [13.0] * 3}])) == (False, 13.0)
    crashed = collision_and_min_gap(make_trace([{"gap": [2.0, 0.5, -0.1]}], collided=True))
    assert crashed[0] is True and crashed[1] <= 0
    lead_only = Trace(0.1, [TraceRecord(0.0, (VehicleSignals(0.0, 1.0, 0.0),))])
    with pytest.raises(ValueError):
        collision_and_min_gap(lead_only)


def test_settle_time_and_max_error_window():
    trace = make_trace([{"e": [1.0, 0.2, 0.04, 0.0, 0.3, 0.01]}])
    assert settle_time(trace) == pytest.approx(0.4)
    assert max_abs_spacing_error(trace) == 1.0
    assert max_abs_spacing_error(trace, start=0.2) == 0.3


def test_report_text_is_key_value_lines():
    text = report(make_trace([{"h": [1.1] * 3, "e": [0.1] * 3}]), 1.0).as_text("acc_")
    keys = [line.split(" = ")[0] for line in text.splitlines()]
    assert keys == ["acc_headway_rmse_s", "acc_net_headway_rmse_s", "acc_max_abs_spacing_error_m", "acc_min_gap_m",
                    "acc_settle_time_s", "acc_collided"]
