"""Command line entry point: ``qscramble run|validate|presets``."""
import argparse
import json
import logging
import sys

from .config import WORKERS_ENV, list_presets, load_config
from .errors import QScrambleError


def _add_config_args(p):
    p.add_argument("config", help="YAML config file or a preset name")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY.PATH=VALUE",
        help="override a config key by dotted path (value parsed as YAML); repeatable",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="qscramble", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV tables + metadata.json")
    _add_config_args(run)
    run.add_argument("-o", "--output", help="output directory (overrides the config key 'output')")
    run.add_argument("-j", "--workers", type=int, help=f"worker threads (default: ${WORKERS_ENV} or 1)")

    val = sub.add_parser("validate", help="resolve and validate a config, print it as JSON")
    _add_config_args(val)

    sub.add_parser("presets", help="list built-in presets")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="qscramble: %(levelname)s: %(message)s", level=logging.WARNING)
    if args.command == "presets":
        print(list_presets())
        return 0
    # imported lazily so `presets` stays cheap
    from .runner import run_experiment

    overrides = list(args.overrides)
    if getattr(args, "output", None):
        overrides.append(f"output={args.output}")
    if getattr(args, "workers", None):
        overrides.append(f"workers={args.workers}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "validate":
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        for path in run_experiment(cfg):
            print(path)
    except QScrambleError as exc:
        print(f"qscramble: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
