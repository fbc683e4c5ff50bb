"""Command-line front end.

Subcommands:

* ``solve``    -- build the modified/extended matrices from a config and write
  ``solution.json`` with the accident probabilities, expected accident times
  and the implied accident frequency; ``--mc-check N`` appends a Monte Carlo
  cross-check block.
* ``simulate`` -- run one task (or ``--all``) of the car-following experiment
  and write per-task frame logs, histograms and summaries.
* ``entropy``  -- read a histogram CSV and print its Shannon and risk entropy.
* ``report``   -- render PNG bar charts for histogram CSVs, plus a combined
  frequency figure.

Exit codes: 0 success, 2 user/config error, 3 computational error.
All outputs are pure functions of the config bytes and flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import exit_analysis, markov_model, risk_metrics, sim_carfollow
from .config import RunConfig, load_config
from .errors import ConfigError, RiskModelError
from .markov_model import TrafficEnv
from .state_space import NO_CONFLICT

_EXIT_USER = 2
_EXIT_COMPUTE = 3


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8", newline="\n")


def _solution_payload(run: RunConfig, mc_runs: int | None):
    cfg = run.state_space
    params = run.chain_params
    env = run.traffic
    p0, q0 = markov_model.free_state_probs(env)
    mean_speed = markov_model.equilibrium_speed(env.density_k, env)
    p3 = markov_model.trip_end_prob(run.section_length, mean_speed, cfg.delta)
    modified = markov_model.build_modified_matrix(params, p0, q0)
    extended = markov_model.build_extended_matrix(params, env, p3)
    h = exit_analysis.exit_probability(extended)
    g = exit_analysis.exit_time(modified)
    payload = {
        "h": h.tolist(),
        "g": g.tolist(),
        "accident_frequency_per_hour": exit_analysis.accident_frequency(float(g[0]), cfg.delta),
        "params": {
            "alpha": params.alpha,
            "beta": params.beta,
            "c": params.c,
            "d_count": params.d_count,
            "delta": cfg.delta,
            "p0": p0,
            "q0": q0,
            "p3": p3,
            "density_k": env.density_k,
            "flow_q": env.flow_q,
            "ttc_threshold_c": run.ttc_threshold_c,
        },
    }
    if mc_runs:
        h_hat, _ = exit_analysis.mc_exit_oracle(extended, 0, mc_runs, run.seed)
        _, g_hat = exit_analysis.mc_exit_oracle(modified, 0, mc_runs, run.seed)
        payload["mc"] = {
            "runs": mc_runs,
            "seed": run.seed,
            "h0": {"mean": h_hat.mean, "std_error": h_hat.std_error},
            "g0": {"mean": g_hat.mean, "std_error": g_hat.std_error},
        }
    return payload


def cmd_solve(args) -> int:
    run = load_config(args.config, seed_override=args.seed)
    out_dir = _output_dir(args, run)
    payload = _solution_payload(run, args.mc_check)
    _write_json(out_dir / "solution.json", payload)
    print(out_dir / "solution.json")
    return 0


def _frames_csv_lines(frames) -> list[str]:
    lines = ["frame,time_s,leader_pos_m,leader_v_mps,follower_pos_m,follower_v_mps,"
             "tta_s,state,action,delayed,errored"]
    for f in frames:
        tta = "-inf" if f.tta == NO_CONFLICT else repr(f.tta)
        lines.append(
            f"{f.frame_index},{f.time!r},{f.leader.position!r},{f.leader.speed!r},"
            f"{f.follower.position!r},{f.follower.speed!r},{tta},{f.state},"
            f"{f.action},{int(f.delayed)},{int(f.errored)}"
        )
    return lines


def _run_task_range(packed):
    task, cfg, controller, record, lo, hi = packed
    return sim_carfollow.run_task(task, cfg, controller, record_frames=record,
                                  trip_range=(lo, hi))


def _simulate_one(run: RunConfig, task_id: int, out_dir: Path, jobs: int) -> None:
    task = run.tasks[task_id]
    cfg = run.state_space
    if jobs > 1 and task.trip_count > 1:
        bounds = [(i * task.trip_count) // jobs for i in range(jobs + 1)]
        packs = [(task, cfg, run.controller, run.record_frames, lo, hi)
                 for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_task_range, packs))
        result = sim_carfollow.merge_results(parts)
    else:
        result = sim_carfollow.run_task(task, cfg, run.controller,
                                        record_frames=run.record_frames)
    stem = f"task{task_id}"
    if run.record_frames:
        frames_path = out_dir / f"{stem}_frames.csv"
        frames_path.write_text("\n".join(_frames_csv_lines(result.frames)) + "\n",
                               encoding="utf-8", newline="\n")
    risk_metrics.write_histogram_csv(out_dir / f"{stem}_hist.csv", result.histogram)
    dist = risk_metrics.histogram_to_distribution(result.histogram, cfg)
    summary = {
        "task": task_id,
        "flow_q": task.flow_q,
        "ttc_threshold_c": task.ttc_threshold_c,
        "trip_count": task.trip_count,
        "accidents": result.accidents,
        "trips_completed": result.trips_completed,
        "empirical_h0": result.empirical_h0,
        "risk_entropy_seconds": risk_metrics.risk_entropy(dist),
        "shannon_entropy_bits": risk_metrics.shannon_entropy(result.histogram),
        "frame_count": result.histogram.total,
    }
    _write_json(out_dir / f"{stem}_summary.json", summary)
    print(out_dir / f"{stem}_summary.json")


def cmd_simulate(args) -> int:
    run = load_config(args.config, seed_override=args.seed)
    if not run.tasks:
        raise ConfigError("config defines no tasks")
    out_dir = _output_dir(args, run)
    if args.all:
        task_ids = sorted(run.tasks)
    else:
        if args.task is None:
            raise ConfigError("pass --task <id> or --all")
        if args.task not in run.tasks:
            raise ConfigError(f"unknown task {args.task}; configured: {sorted(run.tasks)}")
        task_ids = [args.task]
    for task_id in task_ids:
        _simulate_one(run, task_id, out_dir, args.jobs)
    return 0


def cmd_entropy(args) -> int:
    if args.config:
        run = load_config(args.config, seed_override=args.seed)
        cfg = run.state_space
    else:
        from .state_space import StateSpaceConfig
        cfg = StateSpaceConfig.default()
    hist = risk_metrics.read_histogram_csv(args.histogram)
    dist = risk_metrics.histogram_to_distribution(hist, cfg)
    payload = {
        "shannon_entropy_bits": risk_metrics.shannon_entropy(hist),
        "risk_entropy_seconds": risk_metrics.risk_entropy(dist),
    }
    print(json.dumps(payload, indent=2))
    return 0


def cmd_report(args) -> int:
    from .plotting import render_frequency_comparison_png, render_histogram_png

    paths = [Path(p) for p in args.histograms]
    if not paths:
        raise ConfigError("pass at least one histogram CSV")
    hists = {}
    for path in paths:
        hist = risk_metrics.read_histogram_csv(path)
        hists[path.stem] = hist
        png = render_histogram_png(hist, path.with_suffix(".png"), title=path.stem)
        print(png)
    if len(hists) > 1:
        combined = paths[0].parent / "tasks_frequency.png"
        print(render_frequency_comparison_png(hists, combined))
    return 0


def _output_dir(args, run: RunConfig) -> Path:
    out = args.output or run.output_dir or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_common(parser, config_required=True):
    parser.add_argument("--config", required=config_required, help="path to the run config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--output", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttarisk",
                                     description="Risk-chain solvers and car-following simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve exit probability/time and accident frequency")
    _add_common(p)
    p.add_argument("--mc-check", type=int, default=None, metavar="RUNS",
                   help="append a Monte Carlo cross-check with this many runs")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run car-following tasks")
    _add_common(p)
    p.add_argument("--task", type=int, default=None, help="task id to run")
    p.add_argument("--all", action="store_true", help="run every configured task")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trips")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("entropy", help="entropies of a histogram CSV")
    _add_common(p, config_required=False)
    p.add_argument("histogram", help="path to a state,count CSV")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("report", help="render PNG figures for histogram CSVs")
    _add_common(p, config_required=False)
    p.add_argument("histograms", nargs="+", help="histogram CSV paths")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_USER
    except RiskModelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
