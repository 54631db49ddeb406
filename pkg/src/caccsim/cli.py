"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 a run ended in a collision.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from caccsim import metrics
from caccsim.config import ConfigError, bundled_path, bundled_scenarios, parse_scenario
from caccsim.engine import run_scenario
from caccsim.perception import evaluate_corpus, generate_scenes, write_corpus_csv
from caccsim.plotting import emit_platoon_plot, emit_plots
from caccsim.traceio import write_trace_csv

log = logging.getLogger("caccsim")

EXIT_OK, EXIT_CONFIG, EXIT_COLLISION = 0, 1, 2


def _load(args):
    path = Path(args.scenario)
    if not path.exists() and args.scenario in bundled_scenarios():
        path = bundled_path(args.scenario)
    cfg = parse_scenario(path)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    out = Path(args.out) if args.out else Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _report(cfg, trace, vehicle=1, ratios=False):
    """Metrics of the trace as it is written to CSV."""
    pol = cfg.followers[vehicle - 1].controller.policy
    return metrics.report(trace.rounded(6), pol.t_hw, vehicle, start=cfg.metrics.window_start,
                          standstill=pol.d0, ratios=ratios, norm=cfg.metrics.norm)


def _write_report(out: Path, text: str) -> Path:
    path = out / "metrics.txt"
    path.write_text(text, encoding="ascii")
    return path


def _say(args, text):
    if not args.quiet:
        print(text)


def cmd_run(args) -> int:
    cfg, out = _load(args)
    trace = run_scenario(cfg)
    write_trace_csv(trace, out / "trace.csv")
    rep = _report(cfg, trace)
    _write_report(out, rep.as_text())
    if cfg.output.plots:
        emit_plots({trace.labels[1].upper(): trace}, out, t_hw=cfg.followers[0].controller.policy.t_hw)
    _say(args, rep.as_text().rstrip())
    return EXIT_COLLISION if trace.collided else EXIT_OK


def compare(cfg):
    """ACC and CACC runs of the same scenario, sharing lead and seed."""
    return {mode: run_scenario(cfg.with_mode(mode)) for mode in ("acc", "cacc")}


def cmd_compare(args) -> int:
    cfg, out = _load(args)
    if cfg.channel is None:
        raise ConfigError(f"{cfg.source}: compare needs a [channel] section for the CACC run")
    runs = compare(cfg)
    reps = {}
    for mode, trace in runs.items():
        write_trace_csv(trace, out / f"{mode}_trace.csv")
        reps[mode] = _report(cfg, trace)
    text = reps["acc"].as_text("acc_") + reps["cacc"].as_text("cacc_")
    for key in ("headway_rmse", "net_headway_rmse", "max_abs_spacing_error", "min_gap"):
        text += f"delta_{key} = {getattr(reps['cacc'], key) - getattr(reps['acc'], key):.6f}\n"
    _write_report(out, text)
    if cfg.output.plots:
        emit_plots({"ACC": runs["acc"], "CACC": runs["cacc"]}, out,
                   t_hw=cfg.followers[0].controller.policy.t_hw)
    _say(args, text.rstrip())
    return EXIT_COLLISION if any(tr.collided for tr in runs.values()) else EXIT_OK


def cmd_platoon(args) -> int:
    cfg, out = _load(args)
    if args.n < 2:
        raise ConfigError("platoon needs --n of at least 2")
    chain = cfg.with_followers([cfg.followers[0]] * args.n)
    if args.mode:
        chain = chain.with_mode(args.mode)
    trace = run_scenario(chain)
    write_trace_csv(trace, out / "platoon_trace.csv")
    rep = _report(chain, trace, ratios=True)
    _write_report(out, rep.as_text())
    if cfg.output.plots:
        emit_platoon_plot(trace, out)
    _say(args, rep.as_text().rstrip())
    return EXIT_COLLISION if trace.collided else EXIT_OK


def cmd_perception(args) -> int:
    cfg, out = _load(args)
    pc = cfg.perception
    rng = np.random.default_rng([cfg.sim.seed, 1])
    scenes = generate_scenes(pc.frames, pc.geometry, rng)
    visible = (not args.hide_left, not args.hide_right)
    noise_rng = np.random.default_rng([cfg.sim.seed, 2])
    result = evaluate_corpus(scenes, pc, noise_rng, visible)
    write_corpus_csv(result, out / "perception.csv")
    text = f"frames = {pc.frames}\nagreement_rate = {result.agreement:.6f}\n"
    _write_report(out, text)
    _say(args, text.rstrip())
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, out = _load(args)
    try:
        values = [float(v) for v in args.t_hw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--t-hw expects comma-separated numbers, got {args.t_hw!r}") from None
    if not values:
        raise ConfigError("--t-hw needs at least one value")
    lines = ["t_hw_s,mode,headway_rmse_s,net_headway_rmse_s,max_abs_spacing_error_m,min_gap_m,collided"]
    collided = False
    for t_hw in values:
        point = cfg.with_t_hw(t_hw)
        for mode, trace in compare(point).items():
            rep = _report(point, trace)
            collided |= trace.collided
            lines.append(f"{t_hw:.3f},{mode},{rep.headway_rmse:.6f},{rep.net_headway_rmse:.6f},"
                         f"{rep.max_abs_spacing_error:.6f},{rep.min_gap:.6f},{int(rep.collided)}")
    table = "\n".join(lines) + "\n"
    (out / "sweep.csv").write_text(table)
    _say(args, table.rstrip())
    return EXIT_COLLISION if collided else EXIT_OK


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # on subcommands the flags default to SUPPRESS so they do not mask values given earlier
    none = argparse.SUPPRESS if suppress else None
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=none, help="override the scenario seed")
    flags.add_argument("--out", default=none, help="output directory (default: scenario [output] dir)")
    flags.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False,
                       help="print nothing on success")
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caccsim", parents=[_global_flags(False)],
                                     description="ACC/CACC longitudinal platoon simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub_flags = _global_flags(True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[sub_flags], help=help_)
        p.add_argument("scenario", help="scenario file, or the name of a bundled one")
        p.set_defaults(func=func)
        return p

    add("run", cmd_run, "single run as configured")
    add("compare", cmd_compare, "the same scenario in ACC and in CACC mode")
    p = add("platoon", cmd_platoon, "chain of identical followers")
    p.add_argument("--n", type=int, default=5, help="number of followers")
    p.add_argument("--mode", choices=("acc", "cacc"), default=None)
    p = add("perception", cmd_perception, "in-lane target selection corpus vs ground truth")
    p.add_argument("--hide-left", action="store_true")
    p.add_argument("--hide-right", action="store_true")
    p = add("sweep", cmd_sweep, "headway sweep table")
    p.add_argument("--t-hw", required=True, help="comma-separated headways, e.g. 0.6,0.8,1.0")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"caccsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
