"""Command-line interface: convert benchmark archives, verify bundles.

Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys

from .convert import convert_archive
from .errors import IngestError
from .verify import format_summary, verify_bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsl-ingest",
        description="Convert MAT-format zero-shot benchmark archives into feature bundles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert an archive pair into a bundle directory")
    p.add_argument("--features", required=True, help="MAT file with 'features' and 'labels'")
    p.add_argument("--splits", required=True, help="MAT file with 'att' and *_loc index vectors")
    p.add_argument("--out", required=True, help="bundle directory to create")
    p.add_argument("--normalize", choices=["none", "l2"], default="none",
                   help="per-row feature normalization recorded in metadata")

    p = sub.add_parser("verify", help="revalidate a bundle directory")
    p.add_argument("bundle", help="bundle directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            summary = convert_archive(args.features, args.splits, args.out, args.normalize)
            print(
                f"converted {summary['n_total']} rows "
                f"({summary['num_seen']} seen + {summary['num_unseen']} unseen classes) "
                f"into {args.out}"
            )
        else:
            print(format_summary(verify_bundle(args.bundle)))
        return 0
    except IngestError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
