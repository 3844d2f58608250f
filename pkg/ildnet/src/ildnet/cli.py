"""Command line: train on exported pairs, infer masks from level planes."""

from __future__ import annotations

import argparse
import logging
import sys


def cmd_train(args) -> int:
    from .train import train
    curve = train(args.data, epochs=args.epochs, seed=args.seed,
                  out_path=args.out)
    print("validation pixel accuracy per epoch: "
          + " ".join(f"{v:.4f}" for v in curve))
    print(f"saved model to {args.out}")
    return 0


def cmd_infer(args) -> int:
    from .infer import infer
    shape = infer(args.model, args.infile, args.out)
    print(f"wrote {shape[0]} mask planes of {shape[1]}x{shape[2]} "
          f"to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ildnet",
        description="Level-difference mask network: train and infer.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on exported feature/label pairs")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="produce soft masks for one plane")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
