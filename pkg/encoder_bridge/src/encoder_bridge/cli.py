"""Command line for the embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .bridge import DEFAULT_MODEL, BridgeConfig, SetupError, export_embeddings


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="encoder-bridge",
        description="Export pretrained sentence embeddings for essay corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    export = sub.add_parser("export", help="encode one essay JSONL file")
    export.add_argument("--in", dest="input", required=True, help="essay JSONL")
    export.add_argument("--out", required=True, help="output directory")
    export.add_argument("--model", default=DEFAULT_MODEL,
                        help="sentence-transformers model name or local path")
    export.add_argument("--batch-size", type=int, default=32)
    args = parser.parse_args(argv)

    config = BridgeConfig(input_path=args.input, output_dir=args.out,
                          model=args.model, batch_size=args.batch_size)
    try:
        written = export_embeddings(config)
    except (SetupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(written)} embedding files -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
