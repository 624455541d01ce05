"""Command-line front end: one subcommand per scenario kind.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure,
4 i/o failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import tomli

from .errors import ConfigInvalid, IoError, NumericalError
from .harness import (ScenarioConfig, _KINDS, load_config, run_scenario,
                      write_json)


def _apply_override(cfg: ScenarioConfig, text: str) -> None:
    if "=" not in text:
        raise ConfigInvalid(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    if key == "seed":
        if not isinstance(value, int):
            raise ConfigInvalid("seed override must be an integer")
        cfg.seed = value
    elif key == "label":
        cfg.label = str(value)
    else:
        cfg.params[key] = value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerlab",
        description="numerical experiments on clustered transition layers")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in _KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", type=Path, default=None,
                        help="TOML scenario file (kind must match)")
        sp.add_argument("--out", type=Path, default=None,
                        help="directory for CSV/JSON artifacts")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
        sp.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a single params entry")
        sp.add_argument("--quiet", action="store_true",
                        help="suppress the summary on stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            if cfg.kind != args.command:
                raise ConfigInvalid(
                    f"config kind {cfg.kind!r} does not match "
                    f"subcommand {args.command!r}")
        else:
            cfg = ScenarioConfig(kind=args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        for item in args.set:
            _apply_override(cfg, item)
        summary = run_scenario(cfg, out_dir=args.out)
    except ConfigInvalid as exc:
        print(f"layerlab: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"layerlab: numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    except IoError as exc:
        print(f"layerlab: i/o failure: {exc}", file=sys.stderr)
        return 4
    if not args.quiet:
        print(json.dumps(summary, sort_keys=True, indent=2, allow_nan=False,
                         default=lambda o: float(o)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
