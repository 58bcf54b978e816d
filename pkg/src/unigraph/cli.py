"""Command-line interface.

Subcommands: build-graph, stats, export-dot, selfcheck, train, generate.
Exit codes: 0 success, 1 check or validation failure, 2 usage or I/O
error. All randomness flows from --seed; UNIGRAPH_THREADS caps torch's
internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from unigraph.annotations import DocumentSet, parse_annotation_file
from unigraph.augment import augment_graph
from unigraph.builder import build_graph
from unigraph.errors import AnnotationParseError, AnnotationValidationError, UnigraphError
from unigraph.graph import graph_from_json, graph_stats, graph_to_dot, graph_to_json

log = logging.getLogger("unigraph")


def _read_input(path: str) -> bytes:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such input: {path}")
    return p.read_bytes()


def _write_output(data: str | bytes, out: str | None) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(out).write_bytes(data)


def _error(args, code: int, kind: str, message: str) -> int:
    if getattr(args, "json", False):
        print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)
    return code


def _augment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--augment", action="store_true",
                        help="apply all augmentation passes")
    parser.add_argument("--no-reverse-self-loops", action="store_true")
    parser.add_argument("--no-shortcuts", action="store_true")
    parser.add_argument("--no-supernode", action="store_true")


def _maybe_augment(graph, args):
    if args.augment:
        return augment_graph(graph,
                             reverse_self_loops=not args.no_reverse_self_loops,
                             shortcuts=not args.no_shortcuts,
                             supernode=not args.no_supernode)
    return graph


def cmd_build_graph(args) -> int:
    try:
        ds = parse_annotation_file(_read_input(args.input))
    except FileNotFoundError as exc:
        return _error(args, 2, "io", str(exc))
    except (AnnotationParseError, AnnotationValidationError) as exc:
        return _error(args, 1, "validation", str(exc))
    graph = _maybe_augment(build_graph(ds), args)
    _write_output(graph_to_json(graph), args.out)
    if args.dot:
        Path(args.dot).write_text(graph_to_dot(graph))
    return 0


def cmd_export_dot(args) -> int:
    try:
        raw = _read_input(args.input)
        if args.from_graph:
            graph = graph_from_json(raw)
        else:
            graph = _maybe_augment(build_graph(parse_annotation_file(raw)), args)
    except FileNotFoundError as exc:
        return _error(args, 2, "io", str(exc))
    except (AnnotationParseError, AnnotationValidationError, UnigraphError) as exc:
        return _error(args, 1, "validation", str(exc))
    _write_output(graph_to_dot(graph), args.out)
    return 0


def _doc_rows(ds: DocumentSet) -> list[dict]:
    """Per-document graph statistics (each document as its own input)."""
    rows = []
    for doc in ds.documents:
        single = DocumentSet(documents=(doc,))
        stats = graph_stats(build_graph(single), single.total_tokens)
        rows.append({"doc_id": doc.doc_id, "tokens": stats.input_token_count,
                     "nodes": stats.node_count, "edges": stats.edge_count,
                     "components": stats.component_count})
    return rows


def cmd_stats(args) -> int:
    try:
        ds = parse_annotation_file(_read_input(args.input))
    except FileNotFoundError as exc:
        return _error(args, 2, "io", str(exc))
    except (AnnotationParseError, AnnotationValidationError) as exc:
        return _error(args, 1, "validation", str(exc))

    rows = _doc_rows(ds)
    if args.per_doc:
        out_rows = rows
        header = ["doc_id", "tokens", "nodes", "edges", "components"]
    else:
        buckets: dict[int, list[dict]] = {}
        for row in rows:
            buckets.setdefault(row["tokens"] // args.bucket_size * args.bucket_size,
                               []).append(row)
        out_rows = []
        for start in sorted(buckets):
            group = buckets[start]
            out_rows.append({
                "bucket": start, "docs": len(group),
                "avg_tokens": round(sum(r["tokens"] for r in group) / len(group), 2),
                "avg_nodes": round(sum(r["nodes"] for r in group) / len(group), 2),
                "avg_edges": round(sum(r["edges"] for r in group) / len(group), 2),
            })
        header = ["bucket", "docs", "avg_tokens", "avg_nodes", "avg_edges"]

    if args.json:
        _write_output(json.dumps(out_rows, indent=2) + "\n", args.out)
    else:
        lines = [",".join(header)]
        lines += [",".join(str(r[h]) for h in header) for r in out_rows]
        _write_output("\n".join(lines) + "\n", args.out)
    return 0


def cmd_selfcheck(args) -> int:
    from unigraph.selfcheck import run_selfcheck

    results = run_selfcheck(seed=args.seed)
    if args.json:
        print(json.dumps([{"name": r.name, "passed": r.passed, "detail": r.detail}
                          for r in results], indent=2))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def _model_config(args, vocab_size: int):
    from unigraph.model.config import ModelConfig

    return ModelConfig(
        vocab_size=vocab_size, d_model=args.d_model, n_heads=args.heads,
        omega=args.omega, prop_steps=args.p, enc_layers=args.enc_layers,
        graph_enc_layers=args.graph_enc_layers, dec_layers=args.dec_layers,
        ffn_width=args.ffn_width, dropout_rate=args.dropout)


def cmd_train(args) -> int:
    import torch

    from unigraph.harness.task import build_task
    from unigraph.harness.training import loss_curve_csv, train_toy
    from unigraph.model.checkpoint import save_checkpoint

    torch.manual_seed(args.seed)
    task = build_task(n_examples=args.examples, seed=args.task_seed)
    cfg = _model_config(args, vocab_size=len(task.vocab))
    result = train_toy(task, cfg, args.steps, lr=args.lr,
                       batch_size=args.batch or None, seed=args.seed)
    save_checkpoint(result.model, args.out)
    if args.loss_csv:
        Path(args.loss_csv).write_text(loss_curve_csv(result))
    if result.losses:
        print(f"trained {args.steps} steps: loss {result.losses[0]:.4f} -> {result.losses[-1]:.4f}")
    else:
        print("trained 0 steps: checkpoint equals initialization")
    return 0


def cmd_generate(args) -> int:
    import torch

    from unigraph.harness.generate import generate
    from unigraph.harness.task import build_task
    from unigraph.model.checkpoint import load_checkpoint

    torch.manual_seed(args.seed)
    try:
        model = load_checkpoint(args.ckpt)
    except FileNotFoundError as exc:
        return _error(args, 2, "io", f"no such input: {exc}")
    task = build_task(n_examples=args.examples, seed=args.task_seed)
    beam = 1 if args.greedy else args.beam
    if beam < 1:
        return _error(args, 2, "usage", f"beam size must be >= 1, got {beam}")
    overrides = {}
    if args.p is not None:
        overrides["prop_steps"] = args.p
        overrides["use_propagation"] = args.p > 0
    if args.omega is not None:
        overrides["omega"] = args.omega
    outputs = generate(model, task, beam_size=beam, length_penalty=args.length_penalty,
                       max_len=args.max_len, block_trigrams=not args.no_trigram_block,
                       limit=args.limit, **overrides)
    payload = "\n".join(o.to_json() for o in outputs) + "\n"
    _write_output(payload, args.out)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unigraph",
                                     description="Unified semantic graphs: build, augment, "
                                                 "inspect, and run the graph seq2seq model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="construct a semantic graph from annotations")
    p.add_argument("input")
    p.add_argument("-o", "--out", default=None, help="output JSON path (default stdout)")
    p.add_argument("--dot", default=None, help="also write a DOT rendering here")
    p.add_argument("--json", action="store_true", help="machine-readable errors")
    p.add_argument("--seed", type=int, default=0)
    _augment_flags(p)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("export-dot", help="render a graph as DOT")
    p.add_argument("input")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--from-graph", action="store_true",
                   help="input is a serialized graph, not annotations")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _augment_flags(p)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("stats", help="per-length-bucket graph statistics")
    p.add_argument("input")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--bucket-size", type=int, default=100)
    p.add_argument("--per-doc", action="store_true", help="one row per document")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("selfcheck", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("train", help="train the toy model")
    p.add_argument("--out", default="ckpt.npz")
    p.add_argument("--loss-csv", default=None)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--examples", type=int, default=50)
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--batch", type=int, default=10, help="0 trains full-batch")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--enc-layers", type=int, default=2)
    p.add_argument("--graph-enc-layers", type=int, default=2)
    p.add_argument("--dec-layers", type=int, default=2)
    p.add_argument("--ffn-width", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--omega", type=float, default=0.9)
    p.add_argument("--p", type=int, default=2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode summaries with beam search")
    p.add_argument("--ckpt", required=True)
    p.add_argument("-o", "--out", default=None, help="JSONL output (default stdout)")
    p.add_argument("--examples", type=int, default=50)
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--greedy", action="store_true", help="equivalent to --beam 1")
    p.add_argument("--length-penalty", type=float, default=0.9)
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--no-trigram-block", action="store_true")
    p.add_argument("--p", type=int, default=None, help="override propagation steps")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("UNIGRAPH_THREADS")
    if threads:
        import torch

        torch.set_num_threads(max(1, int(threads)))
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
