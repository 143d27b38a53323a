"""Per-span contextual representation storage and interchange.

A representation source is identified by a (block, component) key. Records
hold float32 vectors for the final token of a span; the reserved span_id
"EOS" marks end-of-sequence token records used by ablations.

Two dump formats are supported and auto-detected on load:
  * JSON Lines, one record per line (interoperable, grep-able);
  * a packed binary sidecar (magic ``NRDv1``) for large dumps:
    per record a u32 header length, a JSON header without "vector",
    then dim x float32 little-endian.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .corpus import Corpus, Document, EntitySpan, TypeQuery
from .errors import (
    DanglingSpanRefError,
    DimMismatchError,
    DumpFormatError,
    InvalidParamsError,
    MissingVectorError,
    UnknownComponentError,
)

EOS_SPAN_ID = "EOS"

DUMP_MAGIC = b"NRDv1"

# Canonical per-block capture points. The vocabulary is open: loading a dump
# registers any well-formed component name it has not seen before.
CANONICAL_COMPONENTS = (
    "attn.q",
    "attn.k",
    "attn.v",
    "attn.out",
    "mlp.gate",
    "mlp.up",
    "mlp.down",
    "norm.attn",
    "norm.mlp",
    "block.in",
    "block.out",
)

_COMPONENT_RE = re.compile(r"^[a-z0-9_]+(\.[a-z0-9_]+)*$")

MentionRef = tuple[str, str]  # (doc_id, span_id)


def validate_component(name: str) -> str:
    if not _COMPONENT_RE.match(name or ""):
        raise UnknownComponentError(
            f"component {name!r} is not a valid name (lowercase dotted identifiers)"
        )
    return name


@dataclass(frozen=True, order=True)
class RepresentationKey:
    """Coordinate of one representation source: transformer block + component."""

    block: int
    component: str

    def __post_init__(self) -> None:
        if self.block < 0:
            raise InvalidParamsError(f"block must be >= 0, got {self.block}")
        validate_component(self.component)

    def __str__(self) -> str:
        return f"{self.block}:{self.component}"

    @classmethod
    def parse(cls, text: str) -> "RepresentationKey":
        block_str, sep, component = text.partition(":")
        if not sep or not block_str.isdigit():
            raise InvalidParamsError(f"expected BLOCK:COMPONENT, got {text!r}")
        return cls(block=int(block_str), component=component)


class RepresentationStore:
    """Write-once map (key) -> (doc_id, span_id) -> float32 vector.

    Dimensionality is enforced per key; stored vectors are returned
    byte-for-byte as written.
    """

    def __init__(self) -> None:
        self._data: dict[RepresentationKey, dict[MentionRef, np.ndarray]] = {}
        self._dims: dict[RepresentationKey, int] = {}

    def add(self, key: RepresentationKey, doc_id: str, span_id: str, vector) -> None:
        vec = np.array(vector, dtype=np.float32)
        if vec.ndim != 1 or vec.size == 0:
            raise DimMismatchError(f"vector for {key}/{doc_id}/{span_id} must be 1-D, non-empty")
        dim = self._dims.setdefault(key, vec.size)
        if vec.size != dim:
            raise DimMismatchError(
                f"key {key}: record ({doc_id}, {span_id}) has dim {vec.size}, expected {dim}"
            )
        vec.flags.writeable = False
        self._data.setdefault(key, {})[(doc_id, span_id)] = vec

    def get(self, key: RepresentationKey, doc_id: str, span_id: str) -> np.ndarray:
        try:
            return self._data[key][(doc_id, span_id)]
        except KeyError:
            raise MissingVectorError(
                f"no vector for key={key} doc={doc_id!r} span={span_id!r}"
            ) from None

    def __contains__(self, item: tuple[RepresentationKey, str, str]) -> bool:
        key, doc_id, span_id = item
        return key in self._data and (doc_id, span_id) in self._data[key]

    def keys(self) -> list[RepresentationKey]:
        return sorted(self._data)

    def dim(self, key: RepresentationKey) -> int:
        if key not in self._dims:
            raise MissingVectorError(f"no records for key={key}")
        return self._dims[key]

    def records(self, key: RepresentationKey) -> Iterator[tuple[str, str, np.ndarray]]:
        """Yield (doc_id, span_id, vector) in insertion order for one key."""
        for (doc_id, span_id), vec in self._data.get(key, {}).items():
            yield doc_id, span_id, vec

    def num_records(self) -> int:
        return sum(len(d) for d in self._data.values())

    def validate_against(self, corpus: Corpus) -> None:
        """Check every record resolves to a corpus span (EOS is reserved)."""
        for key, recs in self._data.items():
            for doc_id, span_id in recs:
                if doc_id not in corpus:
                    raise DanglingSpanRefError(
                        f"key {key}: record references unknown doc {doc_id!r}"
                    )
                if span_id == EOS_SPAN_ID:
                    continue
                doc = corpus.get(doc_id)
                if all(s.span_id != span_id for s in doc.spans):
                    raise DanglingSpanRefError(
                        f"key {key}: record references unknown span {span_id!r} in doc {doc_id!r}"
                    )


# --- dump IO -----------------------------------------------------------------

def _record_header(doc_id: str, span_id: str, key: RepresentationKey, dim: int) -> dict:
    return {
        "doc_id": doc_id,
        "span_id": span_id,
        "block": key.block,
        "component": key.component,
        "dim": dim,
    }


def save_dump(store: RepresentationStore, path: str | Path, binary: bool = False) -> None:
    if binary:
        _save_dump_binary(store, path)
    else:
        _save_dump_jsonl(store, path)


def _save_dump_jsonl(store: RepresentationStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in store.keys():
            for doc_id, span_id, vec in store.records(key):
                obj = _record_header(doc_id, span_id, key, vec.size)
                # float32 -> float is exact, so repr round-trips losslessly
                obj["vector"] = [float(x) for x in vec]
                fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


def _save_dump_binary(store: RepresentationStore, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        for key in store.keys():
            for doc_id, span_id, vec in store.records(key):
                header = json.dumps(
                    _record_header(doc_id, span_id, key, vec.size),
                    ensure_ascii=False,
                    separators=(",", ":"),
                ).encode("utf-8")
                fh.write(struct.pack("<I", len(header)))
                fh.write(header)
                fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def load_dump(path: str | Path, corpus: Corpus | None = None) -> RepresentationStore:
    """Load a JSONL or binary dump, auto-detected by magic bytes.

    With a corpus supplied, every record is checked to reference an existing
    document and span.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(DUMP_MAGIC))
    store = (
        _load_dump_binary(path) if magic == DUMP_MAGIC else _load_dump_jsonl(path)
    )
    if corpus is not None:
        store.validate_against(corpus)
    return store


def _record_from_header(store: RepresentationStore, obj: dict, vec: np.ndarray, where: str) -> None:
    try:
        key = RepresentationKey(block=int(obj["block"]), component=obj["component"])
        doc_id, span_id, dim = obj["doc_id"], obj["span_id"], int(obj["dim"])
    except KeyError as exc:
        raise DumpFormatError(f"{where}: record missing field {exc}") from None
    if vec.size != dim:
        raise DimMismatchError(f"{where}: declared dim {dim} != vector length {vec.size}")
    store.add(key, doc_id, span_id, vec)


def _load_dump_jsonl(path: Path) -> RepresentationStore:
    store = RepresentationStore()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DumpFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from None
            vec = np.asarray(obj.get("vector", []), dtype=np.float32)
            _record_from_header(store, obj, vec, f"{path}:{line_no}")
    return store


def _load_dump_binary(path: Path) -> RepresentationStore:
    store = RepresentationStore()
    data = path.read_bytes()
    pos = len(DUMP_MAGIC)
    record_no = 0
    while pos < len(data):
        record_no += 1
        where = f"{path}#record{record_no}"
        if pos + 4 > len(data):
            raise DumpFormatError(f"{where}: truncated header length")
        (hlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + hlen > len(data):
            raise DumpFormatError(f"{where}: truncated header")
        try:
            obj = json.loads(data[pos:pos + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DumpFormatError(f"{where}: bad header: {exc}") from None
        pos += hlen
        dim = int(obj.get("dim", -1))
        if dim < 0:
            raise DumpFormatError(f"{where}: header missing dim")
        nbytes = dim * 4
        if pos + nbytes > len(data):
            raise DumpFormatError(f"{where}: truncated vector payload")
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).copy()
        pos += nbytes
        _record_from_header(store, obj, vec, where)
    return store


# --- synthetic data ------------------------------------------------------------

@dataclass(frozen=True)
class SynthType:
    """One generated entity type: its label, query phrase, and anchor vectors."""

    name: str
    description: str
    vectors: dict  # RepresentationKey -> np.ndarray (float32)


@dataclass
class SynthData:
    corpus: Corpus
    store: RepresentationStore
    types: list[SynthType]

    def queries(self) -> list[TypeQuery]:
        by_type = self.corpus.mentions_by_type()
        return [
            TypeQuery(
                query_id=t.name,
                description=t.description,
                relevant_doc_ids=frozenset(doc for doc, _ in by_type.get(t.name, [])),
            )
            for t in self.types
        ]

    def query_store(self) -> RepresentationStore:
        """Anchor vectors as a store: doc_id = query_id, span_id = "desc"."""
        qs = RepresentationStore()
        for t in self.types:
            for key in sorted(t.vectors):
                qs.add(key, t.name, "desc", t.vectors[key])
        return qs


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise InvalidParamsError("degenerate zero centroid; change seed or separation")
    return vec / norm


def synth_generate(
    num_types: int,
    mentions_per_type: int,
    dims: dict[RepresentationKey, int],
    informative_key: RepresentationKey,
    separation: float,
    noise: float,
    seed: int,
    signal_dim: int | None = None,
    nuisance_dim: int = 0,
    nuisance_scale: float = 1.0,
    lexical_hint_rate: float = 0.0,
) -> SynthData:
    """Generate a deterministic benchmark corpus with planted type structure.

    At ``informative_key`` each type t has a unit centroid c_t whose pairwise
    angular separation grows with ``separation``; every mention vector is
    normalize(c_t + noise * gaussian), and type-description (anchor) vectors
    are drawn the same way. All other keys carry pure gaussian vectors, as do
    the per-document EOS records at every key (including the informative one).

    ``signal_dim`` confines centroids to the first signal_dim coordinates so
    a learned projection can denoise the complementary subspace; None means
    full-dimensional centroids. ``nuisance_dim``/``nuisance_scale`` give the
    gaussian a fixed anisotropic band: nuisance_dim coordinates (disjoint from
    the signal ones) with nuisance_scale times the standard deviation of the
    rest, mimicking the high-variance type-agnostic directions of real
    transformer activation spaces; defaults keep the noise isotropic.
    ``lexical_hint_rate`` is the fraction of sentences that literally name
    their entity type, giving lexical baselines a partial foothold.
    """
    if num_types < 2 or mentions_per_type < 2:
        raise InvalidParamsError("need num_types >= 2 and mentions_per_type >= 2")
    if separation < 0 or noise < 0:
        raise InvalidParamsError("separation and noise must be >= 0")
    if informative_key not in dims:
        raise InvalidParamsError(f"informative key {informative_key} missing from dims")
    if any(d <= 0 for d in dims.values()):
        raise InvalidParamsError("all dims must be positive")
    info_dim = dims[informative_key]
    k = info_dim if signal_dim is None else signal_dim
    if not 1 <= k <= info_dim:
        raise InvalidParamsError(f"signal_dim must be in [1, {info_dim}], got {k}")
    if nuisance_dim < 0 or k + nuisance_dim > info_dim:
        raise InvalidParamsError(
            f"nuisance_dim must be in [0, {info_dim - k}], got {nuisance_dim}"
        )
    if nuisance_scale < 0:
        raise InvalidParamsError("nuisance_scale must be >= 0")
    if not 0.0 <= lexical_hint_rate <= 1.0:
        raise InvalidParamsError("lexical_hint_rate must be in [0, 1]")

    rng = np.random.default_rng(seed)
    sorted_keys = sorted(dims)

    def embed(sub: np.ndarray) -> np.ndarray:
        full = np.zeros(info_dim)
        full[:k] = sub
        return full

    shared = _unit(rng.standard_normal(k))
    centroids = []
    for _ in range(num_types):
        direction = _unit(rng.standard_normal(k))
        centroids.append(embed(_unit((1.0 - separation) * shared + separation * direction)))

    noise_std = np.ones(info_dim)
    noise_std[k:k + nuisance_dim] = nuisance_scale

    def draw_near(centroid: np.ndarray) -> np.ndarray:
        sample = centroid + noise * (noise_std * rng.standard_normal(info_dim))
        return _unit(sample).astype(np.float32)

    store = RepresentationStore()
    docs: list[Document] = []
    types: list[SynthType] = []

    for t in range(num_types):
        name = f"kind{t:02d}"
        for m in range(mentions_per_type):
            doc_id = f"doc-{t:02d}-{m:02d}"
            surface = f"sample-{t:02d}-{m:02d}"
            hinted = rng.random() < lexical_hint_rate
            if hinted:
                text = f"{surface}, one {name}, appeared in field note {m:02d}."
            else:
                text = f"{surface} appeared in field note {m:02d}."
            span = EntitySpan(
                span_id="s0",
                char_start=0,
                char_end=len(surface),
                surface=surface,
                type_labels=frozenset({name}),
            )
            docs.append(Document(doc_id=doc_id, text=text, spans=[span]))
            for key in sorted_keys:
                if key == informative_key:
                    store.add(key, doc_id, "s0", draw_near(centroids[t]))
                else:
                    store.add(key, doc_id, "s0",
                              rng.standard_normal(dims[key]).astype(np.float32))
                store.add(key, doc_id, EOS_SPAN_ID,
                          rng.standard_normal(dims[key]).astype(np.float32))
        anchor_vectors = {}
        for key in sorted_keys:
            if key == informative_key:
                anchor_vectors[key] = draw_near(centroids[t])
            else:
                anchor_vectors[key] = rng.standard_normal(dims[key]).astype(np.float32)
        types.append(SynthType(name=name, description=name, vectors=anchor_vectors))

    return SynthData(corpus=Corpus(docs), store=store, types=types)
