"""Command-line entry point: ``gridcoh {simulate,analyze,partition,pipeline}``.

Every subcommand takes ``--config FILE``; explicit flags and ``--set
key=value`` pairs override the file, which overrides built-in defaults.
Exit codes: 0 success, 2 input/format error, 3 numerical error,
4 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import DEFAULTS, PipelineConfig, dump_config
from .errors import ConfigError, GridCoherencyError

log = logging.getLogger("gridcoherency")

# flag dest -> config key
_FLAG_KEYS = {
    "angles": "input.angles",
    "topology": "input.topology",
    "system": "input.system",
    "faults": "input.faults",
    "planted": "input.planted",
    "out_dir": "output.dir",
    "window": "window.length",
    "stride": "window.stride",
    "m_pts": "hdbscan.m_pts",
    "min_cluster_size": "hdbscan.min_cluster_size",
    "report_window": "report.window",
    "dt": "simulate.dt",
    "t_end": "simulate.t_end",
    "seed": "seed",
}


def _common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--out-dir", help="directory for output files")
    p.add_argument("--figures", action="store_true", default=None,
                   help="also render PNG figures next to the CSV/JSON outputs")
    p.add_argument("-v", "--verbose", action="store_true")


def _analysis_flags(p):
    p.add_argument("--angles", help="angle CSV (t,<bus>,...)")
    p.add_argument("--window", type=int, help="window length in samples")
    p.add_argument("--stride", type=int, help="window stride in samples")
    p.add_argument("--m-pts", type=int, help="HDBSCAN neighbourhood size (self-inclusive)")
    p.add_argument("--min-cluster-size", type=int)
    p.add_argument("--report-window", type=int, help="window index to report (-1 = last)")


def _sim_flags(p):
    p.add_argument("--system", help="swing system JSON (default: bundled 9-machine system)")
    p.add_argument("--faults", help="fault schedule JSON")
    p.add_argument("--planted", help="planted group spec JSON instead of a swing system")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcoh",
        description="Bus coherency detection and HDBSCAN islanding from voltage-angle traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="swing system or planted spec -> angle CSV")
    _common(p)
    _sim_flags(p)
    p.add_argument("--out", help="angle CSV path (default: <out-dir>/angles.csv)")

    p = sub.add_parser("analyze", help="angle CSV -> similarity CSV + index-series CSV")
    _common(p)
    _analysis_flags(p)
    p.add_argument("--topology", help="optional topology CSV; enables island connectivity repair")

    p = sub.add_parser("partition", help="angle CSV + topology CSV -> island-report JSON")
    _common(p)
    _analysis_flags(p)
    p.add_argument("--topology", help="topology CSV (bus_a,bus_b[,line_id])")

    p = sub.add_parser("pipeline", help="end to end: simulate (if no angles), analyze, partition")
    _common(p)
    _analysis_flags(p)
    _sim_flags(p)
    p.add_argument("--topology")

    p = sub.add_parser("show-config", help="print the effective configuration")
    _common(p)
    _analysis_flags(p)
    _sim_flags(p)
    p.add_argument("--topology")
    return parser


def effective_config(args) -> PipelineConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        overrides[key] = value
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    if args.figures:
        overrides["output.figures"] = True
    return PipelineConfig.load(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = effective_config(args)
        if args.command == "show-config":
            sys.stdout.write(dump_config(config.values))
        elif args.command == "simulate":
            written = pipeline.simulate(config, args.out)
            for what, path in written.items():
                print(f"{what}: {path}")
        elif args.command == "analyze":
            _, rows = pipeline.analyze(config)
            print(f"{len(rows)} windows -> {config.out_dir}")
        elif args.command == "partition":
            report, _ = pipeline.partition_cmd(config)
            print(f"k = {report.k} islands, {len(report.cutset)} cut lines -> {config.out_dir}")
        elif args.command == "pipeline":
            report, rows, _ = pipeline.run_pipeline(config)
            print(f"{len(rows)} windows, k = {report.k} islands -> {config.out_dir}")
    except GridCoherencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
