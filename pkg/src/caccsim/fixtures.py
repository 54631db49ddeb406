"""Generator for the bundled urban-like replay trace.

The trace is an IDM drive with aggressive parameters over a stop-and-go
set-speed schedule.  ``python -m caccsim.fixtures`` rewrites the bundled CSV;
the test suite checks the shipped file against this generator.
"""

from __future__ import annotations

import sys
from pathlib import Path

from caccsim.idm import IdmDriver, IdmParams, ReplayTrace, SetSpeedSchedule

URBAN_SCHEDULE = [
    (0.0, 11.0), (18.0, 5.0), (28.0, 14.0), (50.0, 0.0), (62.0, 12.5),
    (80.0, 4.0), (90.0, 13.5), (110.0, 7.0), (118.0, 0.0),
]
URBAN_IDM = IdmParams(v0=11.0, s0=2.0, T=1.0, a=2.0, b=2.5, delta=4.0, b_hard=3.0)
URBAN_DURATION = 130.0
URBAN_DT = 0.01
URBAN_EVERY = 5  # keep every 5th step -> 20 Hz samples


def generate_urban_trace() -> ReplayTrace:
    driver = IdmDriver(URBAN_IDM, SetSpeedSchedule(URBAN_SCHEDULE))
    n = int(round(URBAN_DURATION / URBAN_DT))
    v, ts, vs, accs = 0.0, [], [], []
    for k in range(n + 1):
        t = k * URBAN_DT
        v_next = max(0.0, v + driver.accel(t, v) * URBAN_DT)
        applied = (v_next - v) / URBAN_DT
        if k % URBAN_EVERY == 0:
            ts.append(round(t, 3))
            vs.append(round(v, 6))
            accs.append(round(applied, 6))
        v = v_next
    return ReplayTrace(ts, vs, accs)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else Path(__file__).parent / "data" / "urban_trace.csv"
    generate_urban_trace().to_csv(out)
    print(out)


if __name__ == "__main__":
    main()
