"""Command-line front end: ``cbb-adapter infer`` and ``cbb-adapter finetune``.

Thin argparse wrapper over run_inference / fine_tune. Exit codes: 0 on
success, 2 for usage errors, 1 for runtime adapter failures.
"""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig, FineTuneSettings
from .errors import AdapterError
from .inference import run_inference
from .training import fine_tune


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", default="unet-t0", help="model preset identifier")
    parser.add_argument("--battery", required=True, help="battery manifest.jsonl")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--export", default="binary", choices=("binary", "probability"))
    parser.add_argument("--checkpoint", default=None, help="state-dict .pt to load")
    parser.add_argument(
        "--deterministic", action="store_true",
        help="pin seeds and refuse nondeterministic kernels",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbb-adapter",
        description="segmentation-model adapter for cbb batteries",
    )
    sub = parser.add_subparsers(dest="command")

    infer = sub.add_parser("infer", help="export masks for one battery")
    _common(infer)

    tune = sub.add_parser("finetune", help="fine-tune with per-epoch mask dumps")
    _common(tune)
    tune.add_argument("--train", required=True, help="training manifest.jsonl")
    tune.add_argument("--epochs", type=int, default=None)
    tune.add_argument("--batch-size", type=int, default=None)
    tune.add_argument("--learning-rate", type=float, default=None)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        settings = FineTuneSettings()
        if args.command == "finetune":
            overrides = {
                key: value
                for key, value in (
                    ("epochs", args.epochs),
                    ("batch_size", args.batch_size),
                    ("learning_rate", args.learning_rate),
                )
                if value is not None
            }
            if overrides:
                from dataclasses import replace

                settings = replace(settings, **overrides)
        config = AdapterConfig(
            model=args.model,
            battery_manifest=args.battery,
            out_dir=args.out,
            device=args.device,
            export=args.export,
            checkpoint=args.checkpoint,
            training_manifest=getattr(args, "train", None),
            deterministic=args.deterministic,
            finetune=settings,
        )
    except ValueError as exc:
        print(f"cbb-adapter: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "infer":
            out = run_inference(config)
            print(f"wrote masks to {out}")
        else:
            dirs = fine_tune(config)
            print(f"trained {len(dirs)} epochs; dumps: {', '.join(d.name for d in dirs)}")
    except AdapterError as exc:
        print(f"cbb-adapter: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
