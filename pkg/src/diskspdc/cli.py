"""Command-line interface.

One subcommand per experiment; every command accepts --config, --seed,
--out, and --format.  Tables go to stdout (or --out) in a deterministic
CSV or JSON form; summary lines are prefixed with '#'.  Exit codes:
0 success, 2 configuration problems, 3 runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import __version__
from .config import (ConfigError, config_reference, default_config,
                     load_config, serialize_config)
from .events import EventFormatError
from .franson import FitError
from .material import WavelengthRangeError
from .matching import GridResolutionError
from .resonator import CalibrationError
from .tables import format_table
from . import pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diskspdc",
        description="Simulate photon-pair generation in a birefringent "
                    "lithium-niobate microdisk: resonance combs, "
                    "natural phase matching, and coincidence statistics.",
        epilog=config_reference(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", metavar="PATH",
                       help="config file; defaults apply when omitted")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("-o", "--out", metavar="PATH",
                       help="write the result table to a file")
        p.add_argument("-f", "--format", choices=("csv", "json"),
                       default="csv", help="table format (default csv)")
        return p

    add("run", "run the experiment named by the config's experiment key")
    p = add("modes", "list calibrated resonance combs")
    p.add_argument("--family", help="restrict to one family id")
    add("match", "list energy-matched triples")
    p = add("trace", "conversion amplitude around the disk for one triple")
    p.add_argument("--delta-m", type=int, default=None,
                   help="mode-number mismatch of the triple to trace "
                        "(default: the strongest matched triple)")
    p.add_argument("--turns", type=int, default=None,
                   help="propagation turns (default: matching.n_turns)")
    add("scan", "matched triples across the filter band with strengths")
    p = add("simulate", "generate a timestamp stream and write it to a file")
    p.add_argument("--events", metavar="PATH", default="events.ttps",
                   help="output event file (default events.ttps)")
    p.add_argument("--events-format", choices=("binary", "csv"),
                   default=None,
                   help="event file format (default: by extension)")
    p.add_argument("--duration", type=float, default=None, metavar="S",
                   help="stream duration in seconds "
                        "(default: sweep.duration_s)")
    p = add("coinc", "two-fold coincidence metrics of an event stream")
    p.add_argument("--events", metavar="PATH", default=None,
                   help="event file to analyse (default: simulate one)")
    p.add_argument("--duration", type=float, default=None, metavar="S",
                   help="duration when simulating (default: "
                        "sweep.duration_s)")
    add("g2", "heralded second-order correlation of the peak channel")
    add("franson", "time-bin fringe scan and visibility fits")
    add("spectrum", "per-channel coincidence spectrum")
    add("sweep", "pair rate and CAR against pump power")
    return parser


def _load(args) -> "pipeline.RunConfig":
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _dispatch(args, cfg):
    command = args.command
    if command == "run":
        command = cfg.experiment
        if command is None:
            raise ConfigError("run needs the config to set experiment")
    if command == "modes":
        family = getattr(args, "family", None)
        return pipeline.run_modes(cfg, family_id=family)
    if command == "match":
        return pipeline.run_match(cfg)
    if command == "trace":
        return pipeline.run_trace(cfg, delta_m=getattr(args, "delta_m", None),
                                  n_turns=getattr(args, "turns", None))
    if command == "scan":
        return pipeline.scan_table(cfg)
    if command == "simulate":
        return pipeline.run_simulate(
            cfg, getattr(args, "events", "events.ttps"),
            fmt=getattr(args, "events_format", None),
            duration_s=getattr(args, "duration", None))
    if command == "coinc":
        return pipeline.run_coinc(cfg, events_path=getattr(args, "events",
                                                           None),
                                  duration_s=getattr(args, "duration", None))
    if command == "g2":
        return pipeline.run_g2(cfg)
    if command == "franson":
        return pipeline.run_franson(cfg)[:3]
    if command == "spectrum":
        return pipeline.run_spectrum(cfg)
    if command == "sweep":
        return pipeline.run_power_sweep(cfg)
    raise ConfigError(f"unknown experiment {command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        columns, rows, summary = _dispatch(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CalibrationError, FitError, EventFormatError,
            WavelengthRangeError, GridResolutionError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for line in summary:
        print(f"# {line}")
    text = format_table(columns, rows, fmt=args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(f"# wrote {args.out}")
    else:
        print(text, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
