"""embed-extractor command line: serve the HTTP contract or dump a store file."""
from __future__ import annotations

import argparse
import sys

from .config import ExtractorConfig, ExtractorError, POOLING_MODES
from .dump import dump_store
from .service import serve


def _config_from(args) -> ExtractorConfig:
    return ExtractorConfig(
        model=args.model,
        pooling=args.pooling,
        max_tokens=args.max_tokens,
        device=args.device,
        batch_size=args.batch_size,
        expected_dim=args.expected_dim,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-extractor",
        description="Sentence-embedding sidecar: HTTP service or offline store dump",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", default="test-double",
                       help="checkpoint id, or 'test-double' for the built-in encoder")
        p.add_argument("--pooling", choices=POOLING_MODES, default="mean")
        p.add_argument("--max-tokens", type=int, default=512)
        p.add_argument("--device", default="cpu")
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--expected-dim", type=int, default=None,
                       help="fail at startup unless the encoder reports this hidden size")

    p = sub.add_parser("serve", help="run the HTTP embedding service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(command="serve")

    p = sub.add_parser("dump", help="embed an inputs file into a store file")
    common(p)
    p.add_argument("--inputs", required=True,
                   help="JSONL with {item_id, variant, text} per line")
    p.add_argument("--out", required=True, help="store file to write")
    p.set_defaults(command="dump")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from(args)
        if args.command == "serve":
            serve(config, host=args.host, port=args.port)
            return 0
        count = dump_store(args.inputs, args.out, config)
        print(f"wrote {count} records to {args.out}")
        return 0
    except (ExtractorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
