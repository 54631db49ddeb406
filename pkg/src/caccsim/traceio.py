"""CSV serialization of simulation traces.

Column order is a stable contract: ``t_s`` followed, for every vehicle ``i``
(0 = lead), by::

    veh{i}_x_m, veh{i}_v_mps, veh{i}_a_mps2, veh{i}_ades_mps2, veh{i}_gap_m,
    veh{i}_h_s, veh{i}_e_m, veh{i}_ff_mps2, veh{i}_target, veh{i}_bsmage_s

Values use six decimals, absent values are empty fields, lines end in LF.
"""

from __future__ import annotations

from pathlib import Path

from caccsim.engine import SIGNALS, Trace, TraceRecord, VehicleSignals

COLUMN_SUFFIXES = ("x_m", "v_mps", "a_mps2", "ades_mps2", "gap_m", "h_s", "e_m", "ff_mps2",
                   "target", "bsmage_s")


def header(n_vehicles: int) -> list[str]:
    cols = ["t_s"]
    for i in range(n_vehicles):
        cols += [f"veh{i}_{suffix}" for suffix in COLUMN_SUFFIXES]
    return cols


def _fmt(val) -> str:
    if val is None:
        return ""
    if isinstance(val, int):
        return str(val)
    text = "%.6f" % val
    return "0.000000" if text == "-0.000000" else text


def write_trace_csv(trace: Trace, path) -> Path:
    path = Path(path)
    lines = [",".join(header(trace.n_vehicles))]
    for rec in trace.records:
        fields = [_fmt(rec.t)]
        for veh in rec.vehicles:
            fields += [_fmt(getattr(veh, name)) for name in SIGNALS]
        lines.append(",".join(fields))
    with path.open("w", newline="", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_trace_csv(path, dt: float | None = None) -> Trace:
    path = Path(path)
    with path.open(newline="", encoding="ascii") as fh:
        rows = fh.read().splitlines()
    cols = rows[0].split(",")
    n = (len(cols) - 1) // len(SIGNALS)
    if cols != header(n):
        raise ValueError(f"{path}: unexpected trace header")

    def parse(name, text):
        if text == "":
            return None
        return int(text) if name == "target_id" else float(text)

    records = []
    for row in rows[1:]:
        vals = row.split(",")
        vehicles = []
        for i in range(n):
            chunk = vals[1 + i * len(SIGNALS): 1 + (i + 1) * len(SIGNALS)]
            vehicles.append(VehicleSignals(*(parse(name, v) for name, v in zip(SIGNALS, chunk))))
        records.append(TraceRecord(float(vals[0]), tuple(vehicles)))
    if dt is None:
        dt = records[1].t - records[0].t if len(records) > 1 else 0.0
    return Trace(dt, records)
