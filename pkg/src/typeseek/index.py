"""Cosine vector index over per-mention embeddings with document dedup.

Entries are unit-normalized at insert time so cosine similarity reduces to
a dot product; queries run an exact brute-force scan. A document with many
indexed spans is returned at most once, keyed by its best-scoring span.

File format (all integers little-endian): magic ``NRIXv1``, u64 entry
count, u32 vector dim, then per entry (u32 doc_id length, doc_id utf-8,
u32 span_id length, span_id utf-8, dim x float32), and a trailing CRC32
of everything before it.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptIndexError, DimMismatchError, NonFiniteVectorError
from .ranking import RankedItem, RankedResult

INDEX_MAGIC = b"NRIXv1"
DEFAULT_DIM = 500


class VectorIndex:
    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise DimMismatchError(f"index dim must be >= 1, got {dim}")
        self.dim = dim
        self._doc_ids: list[str] = []
        self._span_ids: list[str] = []
        self._vectors: list[np.ndarray] = []  # float32 unit rows
        self._row: dict[tuple[str, str], int] = {}

    def __len__(self) -> int:
        return len(self._doc_ids)

    def add(self, vector, doc_id: str, span_id: str) -> None:
        """Normalize and store; re-adding a (doc, span) replaces its vector."""
        vec = np.asarray(vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size != self.dim:
            raise DimMismatchError(f"entry must be a {self.dim}-vector, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise NonFiniteVectorError(f"entry ({doc_id}, {span_id}) has NaN/inf components")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise NonFiniteVectorError(f"entry ({doc_id}, {span_id}) is all-zero")
        unit = (vec / norm).astype(np.float32)
        key = (doc_id, span_id)
        if key in self._row:
            self._vectors[self._row[key]] = unit
            return
        self._row[key] = len(self._doc_ids)
        self._doc_ids.append(doc_id)
        self._span_ids.append(span_id)
        self._vectors.append(unit)

    def query_topk(self, q, k: int, min_score: float | None = None) -> RankedResult:
        """Top-k documents by best-span cosine; ties broken by doc_id."""
        if k < 0:
            raise DimMismatchError(f"k must be >= 0, got {k}")
        qv = np.asarray(q, dtype=np.float64)
        if qv.ndim != 1 or qv.size != self.dim:
            raise DimMismatchError(f"query must be a {self.dim}-vector, got shape {qv.shape}")
        norm = float(np.linalg.norm(qv))
        if not np.isfinite(norm) or norm == 0.0:
            raise NonFiniteVectorError("query vector is zero or non-finite")
        if k == 0 or not self._vectors:
            return RankedResult([])
        qv = qv / norm
        scores = np.stack(self._vectors).astype(np.float64) @ qv
        best: dict[str, tuple[float, str]] = {}
        for row, score in enumerate(scores):
            s = float(score)
            if min_score is not None and s < min_score:
                continue
            doc_id = self._doc_ids[row]
            span_id = self._span_ids[row]
            cur = best.get(doc_id)
            if cur is None or s > cur[0] or (s == cur[0] and span_id < cur[1]):
                best[doc_id] = (s, span_id)
        ordered = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[0]))
        return RankedResult(
            [RankedItem(doc_id=d, score=s, span_id=sp) for d, (s, sp) in ordered[:k]]
        )

    # --- persistence ---

    def save(self, path: str | Path) -> None:
        body = bytearray()
        body += INDEX_MAGIC
        body += struct.pack("<Q", len(self._doc_ids))
        body += struct.pack("<I", self.dim)
        for row in range(len(self._doc_ids)):
            doc = self._doc_ids[row].encode("utf-8")
            span = self._span_ids[row].encode("utf-8")
            body += struct.pack("<I", len(doc))
            body += doc
            body += struct.pack("<I", len(span))
            body += span
            body += np.ascontiguousarray(self._vectors[row], dtype="<f4").tobytes()
        crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
        with open(path, "wb") as fh:
            fh.write(bytes(body))
            fh.write(struct.pack("<I", crc))

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = Path(path).read_bytes()
        if len(data) < len(INDEX_MAGIC) + 8 + 4 + 4:
            raise CorruptIndexError(f"{path}: file too short")
        if data[: len(INDEX_MAGIC)] != INDEX_MAGIC:
            raise CorruptIndexError(f"{path}: bad magic")
        body, crc_bytes = data[:-4], data[-4:]
        (stored_crc,) = struct.unpack("<I", crc_bytes)
        if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
            raise CorruptIndexError(f"{path}: checksum mismatch")
        pos = len(INDEX_MAGIC)
        (count,) = struct.unpack_from("<Q", body, pos)
        pos += 8
        (dim,) = struct.unpack_from("<I", body, pos)
        pos += 4
        index = cls(dim=dim)
        for i in range(count):
            try:
                (dlen,) = struct.unpack_from("<I", body, pos)
                pos += 4
                doc_id = body[pos:pos + dlen].decode("utf-8")
                pos += dlen
                (slen,) = struct.unpack_from("<I", body, pos)
                pos += 4
                span_id = body[pos:pos + slen].decode("utf-8")
                pos += slen
                if pos + 4 * dim > len(body):
                    raise CorruptIndexError(f"{path}: entry {i} vector truncated")
                vec = np.frombuffer(body, dtype="<f4", count=dim, offset=pos).copy()
                pos += 4 * dim
            except (struct.error, UnicodeDecodeError) as exc:
                raise CorruptIndexError(f"{path}: entry {i} malformed: {exc}") from None
            key = (doc_id, span_id)
            index._row[key] = len(index._doc_ids)
            index._doc_ids.append(doc_id)
            index._span_ids.append(span_id)
            index._vectors.append(vec)
        if pos != len(body):
            raise CorruptIndexError(f"{path}: {len(body) - pos} unexpected trailing bytes")
        return index
