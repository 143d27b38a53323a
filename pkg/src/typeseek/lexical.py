"""Okapi BM25 over sentence-level documents.

Used both as the lexical retrieval baseline and as the similarity scorer
for hard-negative mining. The idf uses the +1 smoothing form
ln(1 + (N - df + 0.5) / (df + 0.5)) so scores are never negative.
"""

from __future__ import annotations

import math
import re
from collections import Counter

from .corpus import Corpus
from .errors import UnknownDocError
from .ranking import RankedItem, RankedResult

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


class Bm25Index:
    """Inverted statistics for Okapi BM25 (k1=1.2, b=0.75 by default)."""

    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self._doc_ids: list[str] = []
        self._tf: dict[str, Counter] = {}
        self._len: dict[str, int] = {}
        self._df: Counter = Counter()

    @classmethod
    def build(cls, docs, k1: float = 1.2, b: float = 0.75) -> "Bm25Index":
        """Build from a Corpus or an iterable of (doc_id, text) pairs."""
        index = cls(k1=k1, b=b)
        if isinstance(docs, Corpus):
            docs = ((d.doc_id, d.text) for d in docs)
        for doc_id, text in docs:
            index.add_document(doc_id, text)
        return index

    def add_document(self, doc_id: str, text: str) -> None:
        terms = tokenize(text)
        self._doc_ids.append(doc_id)
        tf = Counter(terms)
        self._tf[doc_id] = tf
        self._len[doc_id] = len(terms)
        for term in tf:
            self._df[term] += 1

    def __len__(self) -> int:
        return len(self._doc_ids)

    @property
    def avg_len(self) -> float:
        if not self._doc_ids:
            return 0.0
        return sum(self._len.values()) / len(self._doc_ids)

    def idf(self, term: str) -> float:
        df = self._df.get(term, 0)
        n = len(self._doc_ids)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, query_terms: list[str], doc_id: str) -> float:
        """BM25 score of one document against a tokenized query."""
        if doc_id not in self._tf:
            raise UnknownDocError(f"document {doc_id!r} was never indexed")
        tf = self._tf[doc_id]
        length = self._len[doc_id]
        avg = self.avg_len
        total = 0.0
        for term in query_terms:
            f = tf.get(term, 0)
            if f == 0:
                continue
            norm = self.k1 * (1.0 - self.b + self.b * length / avg)
            total += self.idf(term) * (f * (self.k1 + 1.0)) / (f + norm)
        return total

    def top_k(self, query: str, k: int) -> RankedResult:
        """Rank all documents with positive score, descending, doc_id tiebreak."""
        terms = tokenize(query)
        scored = []
        for doc_id in self._doc_ids:
            s = self.score(terms, doc_id)
            if s > 0.0:
                scored.append((doc_id, s))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return RankedResult([RankedItem(doc_id=d, score=s) for d, s in scored[:k]])


def bm25_score(index: Bm25Index, query_terms: list[str], doc_id: str) -> float:
    return index.score(query_terms, doc_id)


def bm25_topk(index: Bm25Index, query: str, k: int) -> RankedResult:
    return index.top_k(query, k)
