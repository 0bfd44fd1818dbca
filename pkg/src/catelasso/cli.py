"""Command-line entry point.

Subcommands:
  run       run a benchmark config and write CSV/JSON/SVG reports
  gen       generate one dataset from a config's dgp and dump CSV + truth
  diagnose  emit the theory diagnostic report for one generated dataset

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import DatasetSource, load_config, make_dataset, run_experiment, thread_count
from .data import save_csv, save_truth_json
from .errors import CateLassoError, ConfigError
from .report import emit_report
from .simulate import IhdpConfig, SimConfig
from .theory import build_theory_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cate-bench",
        description="Benchmark runner for treatment-effect estimators",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark config")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--out-dir", default="out", help="directory for report files")
    run.add_argument("--seed", type=int, default=None, help="override seed_base")
    run.add_argument("--timings", action="store_true",
                     help="write measured wall times into reports (breaks byte reproducibility)")
    run.add_argument("--threads", type=int, default=None, help="override worker count")

    gen = sub.add_parser("gen", help="generate one dataset as CSV plus truth sidecar")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--seed", type=int, default=None, help="override the dgp seed")

    diag = sub.add_parser("diagnose", help="emit the theory report for one dataset")
    diag.add_argument("--config", required=True)
    diag.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    diag.add_argument("--seed", type=int, default=None, help="override the dgp seed")
    return parser


def _dgp_with_seed(dgp, seed):
    if seed is None or isinstance(dgp, DatasetSource):
        return dgp
    return replace(dgp, seed=seed)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed_base=args.seed)
    result = run_experiment(cfg, workers=args.threads if args.threads else thread_count())
    paths = emit_report(result, cfg.formats, args.out_dir, cfg.stem,
                        include_timings=args.timings)
    for method, agg in result.aggregates.items():
        print(f"{method}: median rmse {agg['median']:.6g} "
              f"(q1 {agg['q1']:.6g}, q3 {agg['q3']:.6g}, failures {agg['failures']})")
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_gen(args) -> int:
    cfg = load_config(args.config)
    dgp = _dgp_with_seed(cfg.dgp, args.seed)
    if isinstance(dgp, DatasetSource):
        raise ConfigError("gen needs a generative dgp, not a fixed dataset")
    seed = dgp.seed
    data = make_dataset(dgp, seed)
    out = Path(args.out)
    save_csv(data, out)
    truth_path = out.with_suffix("").with_suffix(".truth.json") if out.suffix else Path(str(out) + ".truth.json")
    save_truth_json(data.truth, truth_path)
    print(f"wrote {out}")
    print(f"wrote {truth_path}")
    return 0


def _cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    dgp = _dgp_with_seed(cfg.dgp, args.seed)
    seed = getattr(dgp, "seed", cfg.seed_base)
    data = make_dataset(dgp, seed)
    if isinstance(dgp, SimConfig):
        noise_sd = dgp.noise_sd
    elif isinstance(dgp, IhdpConfig):
        noise_sd = 1.0
    else:
        noise_sd = 1.0
    report = build_theory_report(data, noise_sd=noise_sd, t=cfg.theory_t,
                                 budget=cfg.theory_budget, seed=seed)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map those onto the config-error code
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "diagnose":
            return _cmd_diagnose(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CateLassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
