"""spanprobe command line: dump span representations, emit the sample corpus."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .align import AlignmentFailure
from .corpusio import write_corpus, write_queries
from .extract import extract, load_model_and_tokenizer
from .hooks import CaptureError, HookSpec
from .samples import sample_corpus, sample_queries


def parse_blocks(text: str, num_layers: int | None = None) -> list[int]:
    """Accept '0..31', '0,4,17', or 'all' (needs the layer count)."""
    text = text.strip()
    if text == "all":
        if num_layers is None:
            raise CaptureError("--blocks all requires a loaded model")
        return list(range(num_layers))
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


def cmd_extract(args) -> int:
    from .hooks import decoder_layers

    model, tokenizer = load_model_and_tokenizer(args.model, args.device)
    blocks = parse_blocks(args.blocks, num_layers=len(decoder_layers(model)))
    components = [c for c in args.components.split(",") if c]
    token_rules = tuple(r for r in args.token.split(",") if r)
    spec = HookSpec(
        model_id=args.model,
        points=tuple((b, c) for b in blocks for c in components),
        token_rules=token_rules,
    )
    stats = extract(args.corpus, spec, args.out, model=model, tokenizer=tokenizer,
                    device=args.device, binary=args.binary)
    print(
        f"{stats.documents} documents, {stats.records} records -> {args.out} "
        f"({len(stats.skipped_spans)} spans and {len(stats.skipped_docs)} docs skipped)"
    )
    return 0


def cmd_sample(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(sample_corpus(), out / "corpus.jsonl")
    write_queries(sample_queries(), out / "queries.jsonl")
    print(f"wrote {out / 'corpus.jsonl'} and {out / 'queries.jsonl'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanprobe",
        description="Dump per-span transformer-internal representations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run a model over a corpus and dump vectors")
    p.add_argument("--model", required=True, help="model id or local path")
    p.add_argument("--corpus", required=True)
    p.add_argument("--blocks", default="all", help="'0..N', comma list, or 'all'")
    p.add_argument("--components", default="attn.v,block.out")
    p.add_argument("--token", default="span-end",
                   help="span-end, eos, or span-end,eos")
    p.add_argument("--device", default="cpu")
    p.add_argument("--binary", action="store_true", help="write the NRDv1 sidecar")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sample", help="emit the built-in 20x20 typed sample corpus")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CaptureError, AlignmentFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # console_scripts target
    sys.exit(main())
