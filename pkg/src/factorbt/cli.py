"""Command line front-end.

    factorbt run CONFIG [--out DIR] [--seed N]
    factorbt validate CONFIG
    factorbt synth SPEC --out DIR
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .config import ConfigError, load_config, validate
from .pipeline import StageError, run
from .synth import SynthSpec, write

log = logging.getLogger("factorbt")


def _report(diags) -> bool:
    for d in diags:
        print(d, file=sys.stderr)
    return any(d.level == "error" for d in diags)


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1 if _report(validate(cfg)) else 0


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if _report(validate(cfg)):
        return 1
    out = Path(args.out) if args.out else cfg.output
    if out is None:
        print("error: no output directory (use --out or 'output:')", file=sys.stderr)
        return 2
    try:
        result = run(cfg, out)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, s in result.stats.items():
        log.info(
            "%-8s ann. return by bin %s",
            name,
            " ".join(f"{x:6.2f}" for x in s.ann_return_pct),
        )
    print(out)
    return 0


def cmd_synth(args) -> int:
    try:
        raw = yaml.safe_load(Path(args.spec).read_text(encoding="utf-8")) or {}
        spec = SynthSpec.from_dict(raw)
    except (OSError, yaml.YAMLError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write(spec, args.out)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="factorbt", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the full pipeline and write a report bundle")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="write a synthetic dataset in the input CSV layout")
    s.add_argument("spec")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)
