"""Extraction driver: run documents through a frozen model, dump span vectors.

One document per forward pass, hooks collecting every requested capture
point at once. Spans that cannot be aligned to tokens are skipped with a
warning; documents longer than the model context are skipped whole. The
encoder is never trained, so everything runs under no_grad.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .align import AlignmentFailure, span_end_token
from .corpusio import EOS_SPAN_ID, Doc, DumpWriter, read_corpus
from .hooks import CaptureSession, HookSpec

logger = logging.getLogger(__name__)


@dataclass
class ExtractionStats:
    documents: int = 0
    records: int = 0
    skipped_spans: list[tuple[str, str]] = field(default_factory=list)
    skipped_docs: list[str] = field(default_factory=list)


def load_model_and_tokenizer(model_id: str, device: str = "cpu"):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModelForCausalLM.from_pretrained(model_id, dtype=torch.float32)
    model.to(device)
    model.eval()
    return model, tokenizer


def _context_limit(model, tokenizer) -> int | None:
    limit = getattr(model.config, "max_position_embeddings", None)
    tok_limit = getattr(tokenizer, "model_max_length", None)
    if tok_limit is not None and tok_limit > 1_000_000:
        tok_limit = None  # transformers' sentinel for "unbounded"
    candidates = [x for x in (limit, tok_limit) if x]
    return min(candidates) if candidates else None


def extract(
    corpus,
    spec: HookSpec,
    out_path: str | Path,
    model=None,
    tokenizer=None,
    device: str = "cpu",
    binary: bool = False,
) -> ExtractionStats:
    """Dump one record per (span, capture point) for every corpus document.

    ``corpus`` is a path to a corpus JSONL file or an iterable of Doc.
    A preloaded model/tokenizer pair may be supplied; otherwise
    ``spec.model_id`` is loaded. The dump is written in the retrieval
    engine's interchange format.
    """
    if model is None or tokenizer is None:
        model, tokenizer = load_model_and_tokenizer(spec.model_id, device)
    docs = read_corpus(corpus) if isinstance(corpus, (str, Path)) else corpus
    limit = _context_limit(model, tokenizer)
    eos_id = tokenizer.eos_token_id
    want_spans = "span-end" in spec.token_rules
    want_eos = "eos" in spec.token_rules
    stats = ExtractionStats()

    with DumpWriter(out_path, binary=binary) as writer, torch.no_grad():
        for doc in docs:
            encoded = tokenizer(doc.text, return_offsets_mapping=True,
                                add_special_tokens=True)
            ids = list(encoded["input_ids"])
            offsets = list(encoded["offset_mapping"])
            if want_eos and eos_id is not None and (not ids or ids[-1] != eos_id):
                ids.append(eos_id)
                offsets.append((0, 0))
            if not ids:
                stats.skipped_docs.append(doc.doc_id)
                logger.warning("doc %s: empty tokenization, skipped", doc.doc_id)
                continue
            if limit is not None and len(ids) > limit:
                stats.skipped_docs.append(doc.doc_id)
                logger.warning(
                    "doc %s: %d tokens exceed model context %d, skipped",
                    doc.doc_id, len(ids), limit,
                )
                continue

            positions: list[tuple[str, int]] = []
            if want_spans:
                for span in doc.spans:
                    try:
                        positions.append(
                            (span.span_id, span_end_token(offsets, span.start, span.end))
                        )
                    except AlignmentFailure as exc:
                        stats.skipped_spans.append((doc.doc_id, span.span_id))
                        logger.warning("doc %s span %s: %s, skipped",
                                       doc.doc_id, span.span_id, exc)
            if want_eos:
                positions.append((EOS_SPAN_ID, len(ids) - 1))
            if not positions:
                stats.documents += 1
                continue

            batch = torch.tensor([ids], dtype=torch.long, device=device)
            with CaptureSession(model, spec.points) as session:
                model(batch)
            for block, component in spec.points:
                activations = session.collected[(block, component)]
                for span_id, token_idx in positions:
                    writer.write(
                        doc.doc_id, span_id, block, component,
                        activations[token_idx].cpu().numpy(),
                    )
                    stats.records += 1
            stats.documents += 1

    return stats
