"""Command-line front end.

Commands::

    dsula sample <cfg>   write one batch file per checkpoint plus manifest.csv
    dsula rate <cfg>     full pipeline; writes rates.csv and verdict.csv
    dsula check <cfg>    assumption probes and schedule validation (informational)
    dsula oracle         built-in oracle suites

Exit codes: 0 pass, 2 config error, 3 divergence budget exceeded,
4 rate check failed, 5 oracle failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import oracles, pipeline, sim
from .config import ConfigError, load_config
from .metric import fmt
from .schedule import prefix_times

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_RATE = 4
EXIT_ORACLE = 5

MANIFEST_HEADER = ["n", "t_n", "file", "diverged_count"]
RATES_HEADER = ["n", "t_n", "estimator", "p", "value", "stderr"]


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = Path(args.out) if args.out else cfg.output_dir
    return cfg, out


def cmd_sample(args) -> int:
    cfg, out = _load(args)
    res = pipeline.resolve(cfg)
    batches = pipeline.sample_batches(cfg, res)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    width = len(str(cfg.checkpoints[-1]))
    for b in batches:
        name = f"batch_{b.step_index:0{width}d}.ulab"
        sim.write_binary(b, out / name)
        rows.append([str(b.step_index), fmt(b.time), name, str(b.diverged_count)])
    _write_csv(out / "manifest.csv", MANIFEST_HEADER, rows)
    print(f"wrote {len(batches)} batches to {out}")
    return EXIT_OK


def cmd_rate(args) -> int:
    cfg, out = _load(args)
    result = pipeline.run_rate(cfg)
    out.mkdir(parents=True, exist_ok=True)
    times = prefix_times(result.resolved.schedule, cfg.checkpoints[-1])
    rows = []
    for n, reports in zip(result.ns, result.reports):
        for r in reports:
            rows.append([str(n), fmt(times[n]), r.estimator, fmt(r.p), fmt(r.value),
                         "" if r.stderr is None else fmt(r.stderr)])
    _write_csv(out / "rates.csv", RATES_HEADER, rows)
    _write_csv(out / "verdict.csv", ["slope", "predicted", "tol", "r2", "pass"],
               [result.check.csv_row()])
    c = result.check
    print(f"slope {c.slope:.4f} predicted {c.predicted:.4f} tol {c.tol:g} r2 {c.r_squared:.4f}: "
          f"{'PASS' if c.passed else 'FAIL'}")
    return EXIT_OK if c.passed else EXIT_RATE


def cmd_check(args) -> int:
    cfg, _ = _load(args)
    sys.stdout.write(pipeline.run_check(cfg).text())
    return EXIT_OK


def cmd_oracle(args) -> int:
    results = oracles.run_all(args.pairs, args.grad_cases)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all oracles passed" if ok else "oracle failure")
    return EXIT_OK if ok else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
    common.add_argument("--threads", type=int, default=0,
                        help="worker threads (0 = auto); results do not depend on it")
    common.add_argument("--out", default=None, help="output directory (default: config output_dir)")

    ap = argparse.ArgumentParser(prog="dsula", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, helptext in [("sample", cmd_sample, "write checkpoint batches"),
                               ("rate", cmd_rate, "fit and check a convergence rate"),
                               ("check", cmd_check, "probe model assumptions")]:
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("config")
        p.set_defaults(func=fn)
    p = sub.add_parser("oracle", parents=[common], help="run built-in oracle suites")
    p.add_argument("--pairs", type=int, default=10_000, help="random multiset pairs per size")
    p.add_argument("--grad-cases", type=int, default=1000)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, sim.ScheduleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sim.DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
