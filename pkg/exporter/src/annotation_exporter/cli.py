"""Command line for the exporter; flags mirror ExporterConfig."""

from __future__ import annotations

import argparse
import logging
import sys

from annotation_exporter.export import ExporterConfig, export
from annotation_exporter.pipeline import PipelineUnavailableError


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annotation-export",
        description="Export plain text to the annotation JSON schema.")
    parser.add_argument("input", help="plain-text file (one document, or one per line)")
    parser.add_argument("-o", "--out", default=None, help="output path (default stdout)")
    parser.add_argument("--pipeline", choices=["rule", "spacy"], default="rule")
    parser.add_argument("--per-line", action="store_true",
                        help="treat every non-empty line as its own document")
    parser.add_argument("--cross-document", action="store_true",
                        help="resolve coreference over the concatenated document set")
    parser.add_argument("--doc-id-prefix", default="doc")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    cfg = ExporterConfig(
        input_path=args.input, output_path=args.out, pipeline=args.pipeline,
        per_line=args.per_line,
        coref_scope="corpus" if args.cross_document else "document",
        doc_id_prefix=args.doc_id_prefix)
    try:
        data = export(cfg)
    except FileNotFoundError:
        print(f"error: no such input: {args.input}", file=sys.stderr)
        return 2
    except PipelineUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.out:
        sys.stdout.buffer.write(data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
