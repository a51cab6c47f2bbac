"""Command-line entry point: ``bfssl train | test | baseline <name>``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import checkpoint, harness
from .config import RunConfig, load_config
from .errors import BfsslError


def _common(p):
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("runs/latest"))
    p.add_argument("--episodes", type=int)
    p.add_argument("--slots", type=int)
    p.add_argument("--vehicles", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="bfssl", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("train", help="train the SAC allocator and the federated model"))
    t = sub.add_parser("test", help="replay a trained actor deterministically")
    _common(t)
    t.add_argument("--checkpoint", type=Path, required=True, help="agent.bin written by train")
    b = sub.add_parser("baseline", help="run one baseline in place of SAC / blur weighting")
    b.add_argument("name", choices=harness.BASELINES)
    _common(b)
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    for flag, key in (("seed", "seed"), ("episodes", "episodes"), ("slots", "slots"), ("vehicles", "n_vehicles")):
        val = getattr(args, flag)
        if val is not None:
            over[key] = val
    return dataclasses.replace(cfg, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            harness.run_training(cfg, out_dir=args.out)
        elif args.command == "test":
            actor = checkpoint.load_actor(args.checkpoint)
            harness.run_test(cfg, actor, out_dir=args.out)
        else:
            harness.run_baseline(cfg, args.name, out_dir=args.out)
    except (BfsslError, ValueError, OSError) as exc:
        print(f"bfssl: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(json.loads((args.out / "summary.json").read_text()), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
