"""Command-line entry point: export features for one manifest."""

import argparse
import sys

from ewer3.errors import DataError

from .bridge import BridgeConfig, export_features


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewer3-bridge",
        description="Export speech/text encoder features as EWF1/EWL1 files")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--speech-encoder", default="sim-speech-1024")
    parser.add_argument("--text-encoder", default="sim-text-1024")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--layer", type=int, default=-1)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    cfg = None
    try:
        cfg = BridgeConfig(
            manifest=args.manifest, out_dir=args.out,
            speech_encoder=args.speech_encoder,
            text_encoder=args.text_encoder, batch_size=args.batch_size,
            device=args.device, layer=args.layer)
        export_features(cfg)
    except DataError as exc:
        print(f"event=error kind=data message={exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"event=error kind=io message={exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
