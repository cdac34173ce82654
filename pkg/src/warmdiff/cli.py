"""Command-line interface: run, sweep, validate.

Exit codes: 0 success, 1 config error, 2 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    ConfigError,
    InvariantViolation,
    config_to_dict,
    csv_lines,
    load_config,
    load_grid,
    run_experiment,
    sweep,
    trace_lines,
    validate_runs,
)


def _write_lines(path: str | None, lines: list[str]):
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    record, traces = run_experiment(cfg, collect_traces=bool(args.trace))
    if args.trace:
        lines = []
        for result, trace in zip(record.runs, traces):
            header = {"config": config_to_dict(cfg), "run": result.run, "seed": result.seed}
            lines.extend(trace_lines(trace, header))
        _write_lines(args.trace, lines)
    summary = [
        f"runs = {cfg.num_runs}",
        f"mean_nfe = {record.mean_nfe}",
        f"std_nfe = {record.std_nfe}",
        f"exact_match_rate = {record.exact_match_rate}",
        f"mean_token_acc = {record.mean_token_acc}",
        f"capped_runs = {record.capped_runs}",
    ]
    print("\n".join(summary))
    if args.csv:
        _write_lines(args.csv, csv_lines([record]))
    return 0


def _cmd_sweep(args) -> int:
    overrides = load_grid(args.grid)
    records = sweep(overrides)
    _write_lines(args.out, csv_lines(records))
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    problems = validate_runs(cfg)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        raise InvariantViolation(f"{len(problems)} invariant violation(s)")
    print(f"ok: {cfg.num_runs} runs, all invariants hold")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="warmdiff",
        description="Masked-diffusion decoding experiments with warm-start initialization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration and print aggregate metrics")
    p_run.add_argument("--config", required=True, help="flat key=value config file")
    p_run.add_argument("--trace", help="write per-run JSON-lines decode traces to this path")
    p_run.add_argument("--csv", help="also write per-run CSV rows to this path")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="expand a grid config and emit per-run CSV rows")
    p_sweep.add_argument("--grid", required=True, help="config file; sweepable keys may list values")
    p_sweep.add_argument("--out", help="CSV output path (default: stdout)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="run the invariant suite on a configuration")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
