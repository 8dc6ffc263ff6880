"""Command-line entry point.

Runs a scenario file through the engine, writes the metrics file and prints
a per-UE summary.  Exit codes: 0 success, 1 configuration or usage error,
2 runtime failure (capture adapter loss, unwritable metrics sink).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import Optional

import yaml

from .config import ConfigError, RunMode, load_scenario
from .engine import Engine, RunSummary
from .metrics import MetricsSinkError
from .traffic import CaptureError

log = logging.getLogger("ranemu.cli")


class _Parser(argparse.ArgumentParser):
    # usage and config problems exit 1; 2 is reserved for runtime failures
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ranemu",
                description="Real-time 5G RAN emulator: run a scenario file "
                            "and record per-tick metrics.")
    p.add_argument("--config", required=True, metavar="PATH",
                   help="scenario file (YAML)")
    p.add_argument("--duration-ms", type=int, default=None, metavar="N",
                   help="override run.duration_ms")
    p.add_argument("--mode", choices=[m.value for m in RunMode], default=None,
                   help="override run.mode")
    p.add_argument("--seed", type=int, default=None, metavar="N",
                   help="override run.rng_seed")
    p.add_argument("--metrics-out", default=None, metavar="PATH",
                   help="override run.metrics_path")
    p.add_argument("--log-level", default="warning",
                   choices=["debug", "info", "warning", "error"],
                   help="logging verbosity (default: warning)")
    return p


def _apply_overrides(cfg, args):
    run = cfg.run
    updates = {}
    if args.duration_ms is not None:
        if args.duration_ms <= 0:
            raise ConfigError("run.duration_ms", "must be > 0")
        updates["duration_ms"] = args.duration_ms
    if args.mode is not None:
        updates["mode"] = RunMode(args.mode)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("run.rng_seed", "must be >= 0")
        updates["rng_seed"] = args.seed
    if args.metrics_out is not None:
        updates["metrics_path"] = args.metrics_out
    if updates:
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(run, **updates))
    return cfg


def _print_summary(summary: RunSummary, out=None) -> None:
    out = out if out is not None else sys.stdout
    mode = summary.mode.value
    print(f"run: {summary.ticks_executed} ticks ({mode}), "
          f"mean tick {summary.mean_tick_ms:.3f} ms, "
          f"{summary.deadline_miss_count} deadline misses "
          f"({summary.miss_rate:.2%})", file=out)
    print(f"metrics rows written: {summary.rows_written}", file=out)
    header = (f"{'ue':>4} {'dir':<3} {'throughput_mbps':>16} "
              f"{'mean_latency_ms':>16} {'loss_rate':>10}")
    print(header, file=out)
    for (ue_id, direction), fs in sorted(
            summary.flows.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        if fs.ingested_bits == 0 and fs.released_bits == 0:
            continue
        lat = ("-" if fs.mean_latency_ms is None
               else f"{fs.mean_latency_ms:.3f}")
        print(f"{ue_id:>4} {direction.value:<3} "
              f"{fs.mean_throughput_bps / 1e6:>16.3f} {lat:>16} "
              f"{fs.loss_rate:>10.4f}", file=out)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = load_scenario(args.config)
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"ranemu: config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, yaml.YAMLError) as exc:
        print(f"ranemu: cannot load config: {exc}", file=sys.stderr)
        return 1

    try:
        summary = Engine(cfg).run()
    except (CaptureError, MetricsSinkError) as exc:
        print(f"ranemu: runtime failure: {exc}", file=sys.stderr)
        return 2

    _print_summary(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
