#!/usr/bin/env python3
import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from rich.table import Table

from tunneling import *


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunneling",
        description="Arrival times of free and tunneling wave packets: grid, scattering and Nelson ensembles"
    )
    parser.add_argument("command", choices=list(COMMANDS), help="analysis to run")
    parser.add_argument("--config", type=Path, default=None, help="JSON file of dotted configuration keys")
    parser.add_argument("--out", type=Path, default=None, help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, default=None, help="seed of the Nelson ensembles")
    parser.add_argument("--paths", type=int, default=None, help="number of Nelson sample paths")
    parser.add_argument("--weighting", choices=MomentumWeighting.list(), default=None,
                        help="spectral weighting of the transmitted mean momentum")
    parser.add_argument("--threads", type=int, default=1, help="independent runs evaluated concurrently")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--progress", action="store_true", help="show a progress bar for ensembles")
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if args.out is not None:
        config = replace(config, output_dir=str(args.out))
    if args.weighting is not None:
        config = replace(config, analysis=replace(config.analysis, weighting=MomentumWeighting.from_str(args.weighting)))
    if args.seed is not None or args.paths is not None:
        nelson = config.nelson or NelsonConfig()
        if args.seed is not None:
            nelson = replace(nelson, seed=args.seed)
        if args.paths is not None:
            nelson = replace(nelson, n_paths=args.paths)
        config = replace(config, nelson=nelson)
    if args.threads < 1:
        print_message(f"--threads must be at least 1 (got {args.threads})", "error", ConfigError)
    return config


def draw_summary(summary: RunSummary) -> Table:
    table = Table(title=summary.title)
    for column in summary.columns:
        table.add_column(column, justify="right")
    for row in summary.rows:
        table.add_row(*(format(v, ".6g") if isinstance(v, float) else str(v) for v in row))
    return table


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = apply_overrides(Loader.load_config_from_fs(args.config), args)
        runner = COMMANDS[args.command]
        if args.command == "nelson":
            summary = runner(config, threads=args.threads, progress=args.progress)
        else:
            summary = runner(config, threads=args.threads)
    except (TunnelingError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return 2

    console.print(draw_summary(summary))
    logger.info("Wrote %d files under %s", len(summary.files), config.output_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
