"""Annotated-corpus data model: documents, entity spans, type queries.

File formats are JSON Lines (one document / one query per line) so that
100K+ document collections can be streamed. All character offsets are
Unicode scalar-value indices into the document text, half-open
[char_start, char_end).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    CorpusValidationError,
    EmptySpanError,
    InvalidParamsError,
    UnbalancedMarkersError,
)

MARKER = "##"


@dataclass(frozen=True)
class EntitySpan:
    """One entity mention inside a document.

    ``type_labels`` may be empty for detector output that has not been
    typed; gold data carries one or more type names.
    """

    span_id: str
    char_start: int
    char_end: int
    surface: str
    type_labels: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.char_start < 0 or self.char_end <= self.char_start:
            raise CorpusValidationError(
                f"span {self.span_id!r}: need 0 <= char_start < char_end, "
                f"got [{self.char_start}, {self.char_end})"
            )


@dataclass
class Document:
    doc_id: str
    text: str
    spans: list[EntitySpan] = field(default_factory=list)

    def __post_init__(self) -> None:
        # overlaps/nesting are allowed; order by position is an invariant
        self.spans = sorted(self.spans, key=lambda s: (s.char_start, s.char_end, s.span_id))
        self.validate()

    def validate(self) -> None:
        seen: set[str] = set()
        for span in self.spans:
            if span.span_id in seen:
                raise CorpusValidationError(
                    f"doc {self.doc_id!r}: duplicate span_id {span.span_id!r}"
                )
            seen.add(span.span_id)
            if span.char_end > len(self.text):
                raise CorpusValidationError(
                    f"doc {self.doc_id!r} span {span.span_id!r}: range "
                    f"[{span.char_start}, {span.char_end}) exceeds text length {len(self.text)}"
                )
            actual = self.text[span.char_start:span.char_end]
            if actual != span.surface:
                raise CorpusValidationError(
                    f"doc {self.doc_id!r} span {span.span_id!r}: surface {span.surface!r} "
                    f"!= text slice {actual!r}"
                )


@dataclass(frozen=True)
class TypeQuery:
    """A free-text entity-type query with its ground-truth document set."""

    query_id: str
    description: str
    relevant_doc_ids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.description:
            raise CorpusValidationError(f"query {self.query_id!r}: empty description")


class Corpus:
    """An ordered, immutable-after-load collection of documents."""

    def __init__(self, documents: Iterable[Document]):
        self._docs: list[Document] = list(documents)
        self._by_id: dict[str, Document] = {}
        for doc in self._docs:
            if doc.doc_id in self._by_id:
                raise CorpusValidationError(f"duplicate doc_id {doc.doc_id!r}")
            self._by_id[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise CorpusValidationError(f"unknown doc_id {doc_id!r}") from None

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self._docs]

    def mentions_by_type(self) -> dict[str, list[tuple[str, str]]]:
        """Map type label -> ordered list of (doc_id, span_id) mentions."""
        out: dict[str, list[tuple[str, str]]] = {}
        for doc in self._docs:
            for span in doc.spans:
                for label in sorted(span.type_labels):
                    out.setdefault(label, []).append((doc.doc_id, span.span_id))
        return out


# --- span-marker parsing ----------------------------------------------------

def parse_marked_text(marked: str, span_prefix: str = "s") -> tuple[str, list[EntitySpan]]:
    """Strip ``##...##`` entity markers, returning clean text and spans.

    Marker pairs must be balanced and non-nested. Each marked region
    becomes an EntitySpan (empty type_labels) with offsets into the
    cleaned text.
    """
    parts = marked.split(MARKER)
    if len(parts) % 2 == 0:
        raise UnbalancedMarkersError(
            f"odd number of {MARKER!r} markers ({len(parts) - 1}) in {marked!r}"
        )
    clean: list[str] = []
    spans: list[EntitySpan] = []
    offset = 0
    for i, part in enumerate(parts):
        if i % 2 == 1:  # inside a marker pair
            if not part:
                raise EmptySpanError(f"empty marked region at marker #{i} in {marked!r}")
            spans.append(
                EntitySpan(
                    span_id=f"{span_prefix}{len(spans)}",
                    char_start=offset,
                    char_end=offset + len(part),
                    surface=part,
                )
            )
        clean.append(part)
        offset += len(part)
    return "".join(clean), spans


def insert_markers(text: str, spans: list[EntitySpan]) -> str:
    """Inverse of parse_marked_text for non-overlapping spans."""
    out: list[str] = []
    cursor = 0
    for span in sorted(spans, key=lambda s: s.char_start):
        if span.char_start < cursor:
            raise CorpusValidationError("cannot re-mark overlapping spans")
        out.append(text[cursor:span.char_start])
        out.append(MARKER + text[span.char_start:span.char_end] + MARKER)
        cursor = span.char_end
    out.append(text[cursor:])
    return "".join(out)


# --- span matching -----------------------------------------------------------

def span_jaccard(a: EntitySpan, b: EntitySpan) -> float:
    """Character-level Jaccard overlap of two spans of the same document."""
    inter = min(a.char_end, b.char_end) - max(a.char_start, b.char_start)
    if inter <= 0:
        return 0.0
    union = (a.char_end - a.char_start) + (b.char_end - b.char_start) - inter
    return inter / union


def detection_coverage(
    gold: list[EntitySpan],
    predicted: list[EntitySpan],
    threshold: float = 0.8,
) -> float:
    """Fraction of gold spans matched by some predicted span.

    A match requires span_jaccard strictly above ``threshold``. Matching is
    gold-centric many-to-one: one predicted span may cover several gold
    spans. Empty gold is vacuous coverage (1.0).
    """
    if not 0.0 < threshold <= 1.0:
        raise InvalidParamsError(f"threshold must be in (0, 1], got {threshold}")
    if not gold:
        return 1.0
    matched = sum(
        1 for g in gold if any(span_jaccard(g, p) > threshold for p in predicted)
    )
    return matched / len(gold)


# --- JSON Lines file formats -------------------------------------------------

def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "text": doc.text,
        "spans": [
            {
                "span_id": s.span_id,
                "start": s.char_start,
                "end": s.char_end,
                "types": sorted(s.type_labels),
            }
            for s in doc.spans
        ],
    }


def document_from_dict(obj: dict) -> Document:
    try:
        spans = [
            EntitySpan(
                span_id=s["span_id"],
                char_start=s["start"],
                char_end=s["end"],
                surface=obj["text"][s["start"]:s["end"]],
                type_labels=frozenset(s.get("types", [])),
            )
            for s in obj.get("spans", [])
        ]
        return Document(doc_id=obj["doc_id"], text=obj["text"], spans=spans)
    except KeyError as exc:
        raise CorpusValidationError(f"document record missing field {exc}") from None


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(_dumps(document_to_dict(doc)) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    docs: list[Document] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusValidationError(f"{path}:{line_no}: invalid JSON: {exc}") from None
            docs.append(document_from_dict(obj))
    return Corpus(docs)


def save_queries(queries: Iterable[TypeQuery], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(
                _dumps(
                    {
                        "query_id": q.query_id,
                        "description": q.description,
                        "relevant_docs": sorted(q.relevant_doc_ids),
                    }
                )
                + "\n"
            )


def load_queries(path: str | Path) -> list[TypeQuery]:
    out: list[TypeQuery] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(
                    TypeQuery(
                        query_id=obj["query_id"],
                        description=obj["description"],
                        relevant_doc_ids=frozenset(obj.get("relevant_docs", [])),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorpusValidationError(f"{path}:{line_no}: bad query record: {exc}") from None
    return out
