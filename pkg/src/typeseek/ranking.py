"""Document ranking results and the JSON-Lines interchange format.

The interchange file is shared by the vector index, the BM25 baseline,
and any external system under evaluation: one line per query,
``{"query_id": str, "ranking": [{"doc_id": str, "score": float}, ...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusValidationError


@dataclass(frozen=True)
class RankedItem:
    doc_id: str
    score: float
    span_id: str | None = None  # best-scoring span for index results


@dataclass
class RankedResult:
    """A ranked document list: scores non-increasing, doc_ids unique."""

    items: list[RankedItem] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        prev = None
        for item in self.items:
            if item.doc_id in seen:
                raise CorpusValidationError(f"duplicate doc {item.doc_id!r} in ranking")
            seen.add(item.doc_id)
            if prev is not None and item.score > prev:
                raise CorpusValidationError("ranking scores must be non-increasing")
            prev = item.score

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i: int) -> RankedItem:
        return self.items[i]

    def doc_ids(self) -> list[str]:
        return [item.doc_id for item in self.items]


def save_results(results: dict[str, RankedResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in results:
            obj = {
                "query_id": query_id,
                "ranking": [
                    {"doc_id": item.doc_id, "score": float(item.score)}
                    for item in results[query_id]
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_results(path: str | Path) -> dict[str, RankedResult]:
    out: dict[str, RankedResult] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                items = [
                    RankedItem(
                        doc_id=e["doc_id"],
                        score=float(e["score"]),
                        span_id=e.get("span_id"),
                    )
                    for e in obj["ranking"]
                ]
                out[obj["query_id"]] = RankedResult(items)
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorpusValidationError(f"{path}:{line_no}: bad results record: {exc}") from None
    return out
