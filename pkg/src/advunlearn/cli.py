"""Command line entry point: ``advunlearn {pretrain,unlearn,sweep,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment


def _config(args):
    if args.config:
        return experiment.load_config(args.config, seed=args.seed, setting=getattr(args, "setting", None))
    return experiment.resolve_config(seed=args.seed, setting=getattr(args, "setting", None))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advunlearn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON experiment config (defaults used when omitted)")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--out", required=out_required, help="output directory")

    sp = sub.add_parser("pretrain", help="train the classifier and write model.json")
    common(sp)
    sp.add_argument("--setting", choices=["i", "ii"], help="i: train/val, ii: train+val/test")

    sp = sub.add_parser("unlearn", help="unlearn a forget set from a pretrained model")
    common(sp)
    sp.add_argument("--setting", choices=["i", "ii"])
    sp.add_argument("--model", required=True, help="model artifact written by 'pretrain'")

    sp = sub.add_parser("sweep", help="tau x N x strategy x seed grid")
    common(sp)
    sp.add_argument("--setting", choices=["i", "ii"])
    sp.add_argument("--workers", type=int, help="parallel worker processes")

    sp = sub.add_parser("report", help="render the comparison table from results.csv")
    sp.add_argument("results", help="results.csv written by 'sweep'")
    sp.add_argument("--out", help="also write the table to this file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "pretrain":
            doc = experiment.cmd_pretrain(_config(args), args.out)
            print(json.dumps({"eval": {k: doc["eval"][k] for k in ("split", "uar")}, "model_sha256": doc["model_sha256"]}))
        elif args.command == "unlearn":
            doc = experiment.cmd_unlearn(_config(args), args.model, args.out)
            print(json.dumps({k: v["uar"] for k, v in doc["eval"].items()}))
        elif args.command == "sweep":
            rows = experiment.cmd_sweep(_config(args), args.out, args.workers)
            print(f"{len(rows)} runs written to {args.out}/results.csv")
        elif args.command == "report":
            sys.stdout.write(experiment.cmd_report(args.results, args.out))
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"advunlearn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
