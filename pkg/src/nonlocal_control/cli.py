"""Command-line entry point.

    nonlocal-control <solve|gradcheck|optimize|sweep-eta> CONFIG
        [--output-dir DIR] [--validate]

Exit codes: 0 success, 2 configuration/validation error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, cmd_gradcheck, cmd_optimize, cmd_solve,
                      cmd_sweep_eta, load_config)

_COMMANDS = {
    "solve": cmd_solve,
    "gradcheck": cmd_gradcheck,
    "optimize": cmd_optimize,
    "sweep-eta": cmd_sweep_eta,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-control",
                                 description=__doc__.strip().splitlines()[0])
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("config", help="experiment config file (INI)")
    ap.add_argument("--output-dir", default=None,
                    help="override the config's output_dir")
    ap.add_argument("--validate", action="store_true",
                    help="only validate the config, run nothing")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, output_dir=args.output_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.validate:
        print(f"config ok (hash {cfg.config_hash()})")
        return 0
    try:
        root = _COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1
    print(root)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
