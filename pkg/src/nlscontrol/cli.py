"""Command line front-end: ``nlscontrol <experiment> [--preset NAME | --config PATH]``.

Exit codes: 0 success, 2 invalid configuration (nothing written),
3 numerical failure (manifest written with the failing phase).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, ExperimentConfig, preset, preset_names
from .errors import ConfigError
from .experiments import execute

log = logging.getLogger("nlscontrol")


def build_parser():
    parser = argparse.ArgumentParser(prog="nlscontrol",
                                     description="Spectral control experiments for cubic NLS.")
    parser.add_argument("--list-presets", action="store_true", help="print preset names")
    sub = parser.add_subparsers(dest="experiment")
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="YAML configuration file")
        src.add_argument("--preset", metavar="NAME", help="shipped preset name")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--threads", type=int, help="worker threads for ensembles")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig.from_dict({"experiment": args.experiment})
    if cfg.experiment != args.experiment:
        raise ConfigError(f"configuration is for {cfg.experiment!r}, "
                          f"not {args.experiment!r}")
    return cfg.override(seed=args.seed, out=args.out, threads=args.threads)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(preset_names()))
        return 0
    if args.experiment is None:
        parser.print_help()
        return 2
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return 2
    code = execute(cfg)
    if code == 0:
        log.info("wrote results to %s", cfg.out)
    else:
        log.error("numerical failure; see %s/manifest.json", cfg.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
