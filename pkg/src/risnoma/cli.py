"""Command-line entry points: run sweeps, plot CSVs, run the tiny-instance
oracle comparison, and a quick selftest."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _jobs_default() -> int:
    env = os.environ.get("RIS_FP_SIM_JOBS")
    return int(env) if env else 1


def _cmd_run(args) -> int:
    from .harness import emit_csv, load_experiment_config, run_experiment

    exp = load_experiment_config(args.config)
    if args.seed is not None:
        exp = exp.__class__(**{**exp.__dict__, "master_seed": args.seed})
    if args.trials is not None:
        exp = exp.__class__(**{**exp.__dict__, "trials": args.trials})
    records = run_experiment(exp, jobs=args.jobs, timings=args.timings)
    out = os.path.join(args.out_dir, exp.out_csv)
    os.makedirs(args.out_dir, exist_ok=True)
    emit_csv(records, out)
    n_fail = sum(1 for r in records if not r.feasible)
    print(f"wrote {len(records)} records to {out} ({n_fail} flagged infeasible/failed)")
    return 0


def _cmd_plot(args) -> int:
    from .harness import emit_plot

    emit_plot(args.csv, x=args.x, y=args.y, series=args.series, out_path=args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    from .algorithms import algorithm1_sum_rate
    from .channel import sample_channels
    from .harness import (_axis_entropy, brute_force_oracle,
                          load_experiment_config)
    from .metrics import rate_report

    exp = load_experiment_config(args.config)
    if args.seed is not None:
        exp = exp.__class__(**{**exp.__dict__, "master_seed": args.seed})
    if args.trials is not None:
        exp = exp.__class__(**{**exp.__dict__, "trials": args.trials})
    worst = np.inf
    for axis in exp.axis_points():
        cfg = exp.system_config(*axis)
        for trial in range(exp.trials):
            rng = np.random.default_rng(_axis_entropy(exp.master_seed, axis, trial, 0))
            chs = sample_channels(cfg, rng)
            oracle = brute_force_oracle(chs, cfg)
            rng_alg = np.random.default_rng(_axis_entropy(exp.master_seed, axis, trial, 1))
            design, _ = algorithm1_sum_rate(chs, cfg, exp.ao_settings(), rng_alg)
            got = rate_report(design, chs, cfg).sum_rate
            ratio = got / oracle["best_sum_rate"] if oracle["best_sum_rate"] > 0 else 1.0
            worst = min(worst, ratio)
            print(f"axis={axis} trial={trial}: AO={got:.4f} "
                  f"oracle={oracle['best_sum_rate']:.4f} ratio={ratio:.3f}")
    print(f"worst AO/oracle ratio: {worst:.3f}")
    return 0 if worst >= 0.95 else 1


def _cmd_selftest(args) -> int:
    del args
    from .selftest import run_selftest

    return run_selftest()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="risnoma",
                                 description="RIS-assisted NOMA sum-rate / "
                                             "energy-efficiency simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a Monte Carlo sweep from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--trials", type=int, default=None, help="override trial count")
    p.add_argument("--jobs", type=int, default=_jobs_default(),
                   help="worker processes (env RIS_FP_SIM_JOBS)")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--timings", action="store_true",
                   help="record wall-clock runtime_ms (breaks byte reproducibility)")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("plot", help="plot mean +/- std curves from a results CSV")
    p.add_argument("csv")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("oracle", help="compare the sum-rate algorithm against "
                                      "the brute-force oracle (tiny instances)")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("selftest", help="fast internal consistency checks")
    p.set_defaults(fn=_cmd_selftest)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
