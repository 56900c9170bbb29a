"""Command line entry point: ``dlgp bench | stream | verify``."""

from __future__ import annotations

import argparse
import contextlib
import sys

from .dataio import load_config, load_csv
from .errors import DlgpError
from .scenarios import run_checkpoint_scenario, run_online_scenario, write_report


def _add_common(p, test=False):
    p.add_argument("--data", required=True, help="training/stream CSV (inputs then targets)")
    if test:
        p.add_argument("--test", required=True, help="test CSV with the same layout")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", help="report CSV path (default: config report_path, else stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--parallel", action="store_true", help="run one thread per target")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlgp", description="Dividing local Gaussian process benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="stream training data, evaluate a test set at checkpoints")
    _add_common(bench, test=True)
    bench.add_argument("--checkpoints", type=int, help="override the number of checkpoints")

    stream = sub.add_parser("stream", help="predict-then-update over a single stream")
    _add_common(stream)

    verify = sub.add_parser("verify", help="run the built-in oracle and property checks")
    verify.add_argument("--full", action="store_true", help="use acceptance-scale problem sizes")
    verify.add_argument("--seed", type=int, default=0)
    return parser


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ValueError("--seed must be non-negative")
        cfg.seed = args.seed
    if getattr(args, "checkpoints", None) is not None:
        if args.checkpoints < 1:
            raise ValueError("--checkpoints must be >= 1")
        cfg.checkpoints = args.checkpoints
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            from .verify import run_all

            failed = 0
            for result in run_all(full=args.full, seed=args.seed):
                print(result.line(), flush=True)
                failed += not result.ok
            return 1 if failed else 0

        cfg = _load(args)
        d, m = cfg.input_dim, cfg.output_dim
        if args.command == "bench":
            rows = run_checkpoint_scenario(
                load_csv(args.data, d, m), load_csv(args.test, d, m), cfg, parallel=args.parallel
            )
        else:
            rows = run_online_scenario(load_csv(args.data, d, m), cfg, parallel=args.parallel)
        with _output(args.out or cfg.report_path) as fh:
            write_report(rows, fh)
    except (DlgpError, ValueError, OSError) as exc:
        print(f"dlgp: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
