"""``quarma`` command line: run experiments, print noise floors, run the self-test suite."""

from __future__ import annotations

import argparse
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

from .bench import (
    LABELS,
    ConfigError,
    bundled_config_path,
    emit_outputs,
    parse_config,
    run_experiment,
    theoretical_floor,
    write_report_traces,
)
from .signal_model import generate_qarma, write_series_csv


def _load(arg: str):
    path = Path(arg)
    if not path.exists() and not arg.endswith(".toml") and "/" not in arg:
        path = bundled_config_path(arg)
    return parse_config(path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.runs is not None:
        if args.runs < 1:
            raise ConfigError("--runs must be >= 1")
        cfg = replace(cfg, runs=args.runs)
    out = Path(args.out or cfg.output_dir or Path("quarma_out") / cfg.name)
    print(f"{cfg.name}: p={cfg.spec.p} q={cfg.spec.q} m={cfg.resolved_m} T={cfg.T} runs={cfg.runs} "
          f"seeds {cfg.base_seed}..{cfg.base_seed + cfg.runs - 1}", flush=True)

    def progress(res):
        if not args.quiet:
            times = " ".join(f"{a}={res.seconds[a]:.1f}s" for a in cfg.algorithms)
            print(f"  run {res.run} (seed {res.seed}) {times}", flush=True)

    t0 = time.perf_counter()
    report = run_experiment(cfg, workers=args.workers, on_run=progress)
    paths = emit_outputs(report, out)
    if args.traces:
        paths["traces"] = write_report_traces(report, out / "traces.csv")
    print(f"floor {report.floor:.6g}; finished in {time.perf_counter() - t0:.1f}s")
    width = max(len(a) for a in report.algorithms)
    for algo, final, floor, ratio in report.summary_rows():
        print(f"  {algo:<{width}}  final avg MSE {final:.5f}  ratio {ratio:.4f}  ({LABELS.get(algo, algo)})")
    for name, path in paths.items():
        print(f"  wrote {name}: {path}")
    return 0


def cmd_floors(args) -> int:
    cfg = _load(args.config)
    print(f"{cfg.name}: {cfg.noise.law} noise, scale {cfg.noise.scale:g}, floor {theoretical_floor(cfg.noise):.6g}")
    return 0


def cmd_generate(args) -> int:
    cfg = _load(args.config)
    seed = cfg.base_seed + args.run if args.seed is None else args.seed
    series, noises = generate_qarma(cfg.spec, cfg.noise.with_seed(seed), cfg.T, cfg.burn_in)
    path = write_series_csv(args.out, series, noises if args.with_noise else None)
    print(f"wrote {series.shape[0]} samples (seed {seed}) to {path}")
    return 0


def cmd_selftest(args) -> int:
    tests = Path(__file__).resolve().parents[2] / "tests"
    if not tests.is_dir():
        print(f"test suite not found next to the package (looked in {tests})", file=sys.stderr)
        return 2
    cmd = [sys.executable, "-m", "pytest", str(tests), "-q"]
    if not args.all:
        cmd += ["-m", "not acceptance"]
    return subprocess.call(cmd)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quarma", description="Quaternion online ARMA learners and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config and write curves.csv, summary.csv, plot.svg")
    run.add_argument("--config", required=True, help="TOML file, or the name of a bundled config (e.g. example1)")
    run.add_argument("--out", help="output directory (default: config output_dir or quarma_out/<name>)")
    run.add_argument("--workers", type=int, default=1, help="worker processes for independent runs")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--runs", type=int, help="override the number of runs")
    run.add_argument("--traces", action="store_true", help="also write per-run traces.csv")
    run.add_argument("--quiet", action="store_true", help="no per-run progress lines")
    run.set_defaults(func=cmd_run)

    fl = sub.add_parser("floors", help="print the noise floor of a config")
    fl.add_argument("--config", required=True)
    fl.set_defaults(func=cmd_floors)

    gen = sub.add_parser("generate", help="write one synthetic series of a config to CSV")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--run", type=int, default=0, help="run index; the seed is base_seed + run")
    gen.add_argument("--seed", type=int, help="explicit seed (overrides --run)")
    gen.add_argument("--with-noise", action="store_true", help="include the eps_a..eps_d columns")
    gen.set_defaults(func=cmd_generate)

    st = sub.add_parser("selftest", help="run the oracle and property test suite")
    st.add_argument("--all", action="store_true", help="include the slow acceptance experiments")
    st.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"quarma: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced as a diagnostic, not a traceback
        print(f"quarma: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
