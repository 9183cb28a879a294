"""caster-bridge command line: finetune and serve."""

from __future__ import annotations

import argparse
import sys

from .finetune import BridgeConfig, bridge_finetune
from .serve import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caster-bridge",
        description="Fine-tune and serve a small commentary follow-up generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("finetune", help="train on a pairs JSONL and save a model bundle")
    p.add_argument("--pairs", required=True, help="pairs JSONL path")
    p.add_argument("--out", required=True, help="output model directory")
    p.add_argument("--base", default="small",
                   help="model variant (small | base) or path to an existing bundle")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--max-input-len", type=int, default=48)
    p.add_argument("--max-output-len", type=int, default=32)
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--max-new-tokens", type=int, default=24)
    p.add_argument("--device", default="cpu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)

    p = sub.add_parser("serve", help="answer generation requests over stdin/stdout")
    p.add_argument("model_dir", nargs="?", default=None)
    p.add_argument("--echo", action="store_true",
                   help="echo request contexts instead of loading a model")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "finetune":
        config = BridgeConfig(
            pairs_path=args.pairs,
            out_dir=args.out,
            base=args.base,
            epochs=args.epochs,
            max_input_len=args.max_input_len,
            max_output_len=args.max_output_len,
            beam_size=args.beam,
            max_new_tokens=args.max_new_tokens,
            device=args.device,
            seed=args.seed,
            learning_rate=args.lr,
            batch_size=args.batch_size,
        )
        try:
            out_dir = bridge_finetune(config)
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(out_dir)
        return 0
    if not args.echo and args.model_dir is None:
        print("error: serve needs a model directory or --echo", file=sys.stderr)
        return 2
    try:
        return serve(model_dir=args.model_dir, echo=args.echo)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
