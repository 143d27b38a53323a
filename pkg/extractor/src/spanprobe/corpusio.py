"""Readers/writers for the shared corpus and dump file formats.

Deliberately self-contained: the extractor talks to the retrieval engine
only through these JSON Lines / binary formats.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator

import numpy as np

EOS_SPAN_ID = "EOS"
DUMP_MAGIC = b"NRDv1"


@dataclass(frozen=True)
class Span:
    span_id: str
    start: int
    end: int
    types: tuple[str, ...] = ()


@dataclass
class Doc:
    doc_id: str
    text: str
    spans: list[Span] = field(default_factory=list)


def read_corpus(path: str | Path) -> Iterator[Doc]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            spans = [
                Span(
                    span_id=s["span_id"],
                    start=int(s["start"]),
                    end=int(s["end"]),
                    types=tuple(s.get("types", [])),
                )
                for s in obj.get("spans", [])
            ]
            yield Doc(doc_id=obj["doc_id"], text=obj["text"], spans=spans)


def write_corpus(docs, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            obj = {
                "doc_id": doc.doc_id,
                "text": doc.text,
                "spans": [
                    {"span_id": s.span_id, "start": s.start, "end": s.end,
                     "types": sorted(s.types)}
                    for s in doc.spans
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


def write_queries(queries: list[tuple[str, str, list[str]]], path: str | Path) -> None:
    """Write (query_id, description, relevant_doc_ids) rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id, description, relevant in queries:
            obj = {"query_id": query_id, "description": description,
                   "relevant_docs": sorted(relevant)}
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


class DumpWriter:
    """Streams representation records in JSONL or NRDv1 binary form."""

    def __init__(self, path: str | Path, binary: bool = False):
        self.binary = binary
        self.path = Path(path)
        self._fh: IO | None = None

    def __enter__(self) -> "DumpWriter":
        if self.binary:
            self._fh = open(self.path, "wb")
            self._fh.write(DUMP_MAGIC)
        else:
            self._fh = open(self.path, "w", encoding="utf-8")
        return self

    def __exit__(self, *exc) -> None:
        assert self._fh is not None
        self._fh.close()

    def write(self, doc_id: str, span_id: str, block: int, component: str,
              vector: np.ndarray) -> None:
        assert self._fh is not None
        vec = np.ascontiguousarray(vector, dtype="<f4")
        header = {
            "doc_id": doc_id,
            "span_id": span_id,
            "block": block,
            "component": component,
            "dim": int(vec.size),
        }
        if self.binary:
            blob = json.dumps(header, ensure_ascii=False,
                              separators=(",", ":")).encode("utf-8")
            self._fh.write(struct.pack("<I", len(blob)))
            self._fh.write(blob)
            self._fh.write(vec.tobytes())
        else:
            header["vector"] = [float(x) for x in vec]
            self._fh.write(json.dumps(header, ensure_ascii=False,
                                      separators=(",", ":")) + "\n")
