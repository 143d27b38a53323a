"""Type-aware projection head: a two-layer SiLU MLP trained by triplet loss.

The projection maps high-dimensional contextual vectors into a compact
space aligned with cosine similarity. Training triplets pair a type
description (anchor) with a same-type span vector (positive) and a
different-type span vector (negative); the hinge objective is

    loss = max(d(a, p) - d(a, n) + margin, 0),   d = 1 - cosine

after projecting and unit-normalizing all three. Gradients are analytic,
derived through the hinge, the output normalization, dropout, and SiLU;
they are validated against central finite differences in the test suite.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .corpus import Corpus
from .errors import (
    CorruptCheckpointError,
    DimMismatchError,
    InvalidParamsError,
    NonFiniteLossError,
    TypeSplitViolationError,
    TypeWithoutMentionsError,
    ZeroVectorError,
)
from .lexical import Bm25Index, tokenize
from .represent import EOS_SPAN_ID, MentionRef, RepresentationKey, RepresentationStore

MODEL_MAGIC = b"NRPMv1"

DEFAULT_IN_DIM = 1024
DEFAULT_HIDDEN_DIM = 500
DEFAULT_OUT_DIM = 500
DEFAULT_DROPOUT = 0.1


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def silu(x):
    """x * sigmoid(x)."""
    return np.asarray(x, dtype=float) * sigmoid(x) if np.ndim(x) else float(x) * sigmoid(x)


def silu_grad(x):
    s = sigmoid(np.asarray(x, dtype=float))
    return s * (1.0 + np.asarray(x, dtype=float) * (1.0 - s))


@dataclass
class ProjectionModel:
    """Parameters of the two-layer projection MLP.

    Weights are stored row-major: w1 is [hidden, in], w2 is [out, hidden].
    Dropout applies to the hidden activations only while training, with
    inverted scaling so inference needs no adjustment.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    dropout_rate: float = DEFAULT_DROPOUT

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[0]

    @classmethod
    def initialize(
        cls,
        in_dim: int = DEFAULT_IN_DIM,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        out_dim: int = DEFAULT_OUT_DIM,
        dropout_rate: float = DEFAULT_DROPOUT,
        seed: int = 0,
    ) -> "ProjectionModel":
        rng = np.random.default_rng(seed)
        return cls(
            w1=rng.standard_normal((hidden_dim, in_dim)) * np.sqrt(2.0 / in_dim),
            b1=np.zeros(hidden_dim),
            w2=rng.standard_normal((out_dim, hidden_dim)) * np.sqrt(2.0 / hidden_dim),
            b2=np.zeros(out_dim),
            dropout_rate=dropout_rate,
        )

    def copy(self) -> "ProjectionModel":
        return replace(self, w1=self.w1.copy(), b1=self.b1.copy(),
                       w2=self.w2.copy(), b2=self.b2.copy())

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


def sample_dropout_masks(model: ProjectionModel, n_triplets: int, rng: np.random.Generator):
    """Pre-scaled keep masks for the three triplet branches, fixed per step."""
    rate = model.dropout_rate
    if rate <= 0.0:
        return np.ones((3, n_triplets, model.hidden_dim))
    keep = rng.random((3, n_triplets, model.hidden_dim)) >= rate
    return keep / (1.0 - rate)


def forward(
    model: ProjectionModel,
    x,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Project one vector [in] or a batch [n, in] to the output space."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != model.in_dim:
        raise DimMismatchError(f"forward: expected input dim {model.in_dim}, got {arr.shape[1]}")
    hidden = silu(arr @ model.w1.T + model.b1)
    if training and model.dropout_rate > 0.0:
        if rng is None:
            raise InvalidParamsError("training-mode forward with dropout needs an rng")
        keep = rng.random(hidden.shape) >= model.dropout_rate
        hidden = hidden * keep / (1.0 - model.dropout_rate)
    out = hidden @ model.w2.T + model.b2
    return out[0] if single else out


@dataclass(frozen=True)
class Triplet:
    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


@dataclass
class TrainConfig:
    margin: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 3
    hard_negative_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise InvalidParamsError(f"margin must be > 0, got {self.margin}")
        if not 0.0 <= self.hard_negative_fraction <= 1.0:
            raise InvalidParamsError("hard_negative_fraction must be in [0, 1]")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidParamsError("batch_size >= 1 and epochs >= 0 required")


def _normalize_rows(y: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVectorError(f"{what}: zero vector cannot be normalized")
    return y / norms, norms


def triplet_loss(a, p, n, margin: float = 0.2) -> float:
    """Hinge on cosine distances: max(d(a,p) - d(a,n) + margin, 0)."""
    rows = [np.asarray(v, dtype=float)[None, :] for v in (a, p, n)]
    (ah, _), (ph, _), (nh, _) = (_normalize_rows(r, "triplet_loss") for r in rows)
    pre = float((ah * nh).sum() - (ah * ph).sum() + margin)
    return max(pre, 0.0)


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


def _stack(triplets: list[Triplet], in_dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.stack([t.anchor for t in triplets]).astype(float)
    p = np.stack([t.positive for t in triplets]).astype(float)
    n = np.stack([t.negative for t in triplets]).astype(float)
    for arr, name in ((a, "anchor"), (p, "positive"), (n, "negative")):
        if arr.shape[1] != in_dim:
            raise DimMismatchError(f"{name} dim {arr.shape[1]} != model input dim {in_dim}")
    return a, p, n


def batch_loss(
    model: ProjectionModel,
    triplets: list[Triplet],
    margin: float,
    dropout_masks: np.ndarray | None = None,
) -> float:
    """Mean triplet loss of a batch under fixed dropout masks."""
    loss, _ = _batch_loss_and_grads(model, triplets, margin, dropout_masks, want_grads=False)
    return loss


def backward(
    model: ProjectionModel,
    triplets: list[Triplet],
    config: TrainConfig,
    dropout_masks: np.ndarray | None = None,
) -> tuple[float, Gradients]:
    """Mean batch loss and exact analytic gradients for all parameters.

    Hinge-inactive triplets contribute zero gradient but remain in the
    denominator of the batch mean.
    """
    loss, grads = _batch_loss_and_grads(model, triplets, config.margin, dropout_masks,
                                        want_grads=True)
    assert grads is not None
    return loss, grads


def _batch_loss_and_grads(
    model: ProjectionModel,
    triplets: list[Triplet],
    margin: float,
    dropout_masks: np.ndarray | None,
    want_grads: bool,
) -> tuple[float, Gradients | None]:
    if not triplets:
        raise InvalidParamsError("empty triplet batch")
    batch = len(triplets)
    inputs = _stack(triplets, model.in_dim)
    masks = (
        dropout_masks
        if dropout_masks is not None
        else np.ones((3, batch, model.hidden_dim))
    )
    if masks.shape != (3, batch, model.hidden_dim):
        raise DimMismatchError(
            f"dropout masks shape {masks.shape} != {(3, batch, model.hidden_dim)}"
        )

    z1s, hds, yhats, norms = [], [], [], []
    for branch, x in enumerate(inputs):
        z1 = x @ model.w1.T + model.b1
        hd = silu(z1) * masks[branch]
        y = hd @ model.w2.T + model.b2
        yhat, norm = _normalize_rows(y, "projection output")
        z1s.append(z1)
        hds.append(hd)
        yhats.append(yhat)
        norms.append(norm)
    ah, ph, nh = yhats

    sim_ap = (ah * ph).sum(axis=1)
    sim_an = (ah * nh).sum(axis=1)
    pre = sim_an - sim_ap + margin
    active = pre > 0.0
    loss = float(np.maximum(pre, 0.0).mean())

    if not want_grads:
        return loss, None

    scale = active.astype(float)[:, None] / batch
    grad_yhat = [
        (nh - ph) * scale,   # anchor branch
        -ah * scale,         # positive branch
        ah * scale,          # negative branch
    ]

    g_w1 = np.zeros_like(model.w1)
    g_b1 = np.zeros_like(model.b1)
    g_w2 = np.zeros_like(model.w2)
    g_b2 = np.zeros_like(model.b2)
    for branch in range(3):
        g = grad_yhat[branch]
        yhat = yhats[branch]
        # through y/||y||: dL/dy = (g - (g . yhat) yhat) / ||y||
        dy = (g - (g * yhat).sum(axis=1, keepdims=True) * yhat) / norms[branch]
        g_w2 += dy.T @ hds[branch]
        g_b2 += dy.sum(axis=0)
        dhd = dy @ model.w2
        dz1 = dhd * masks[branch] * silu_grad(z1s[branch])
        g_w1 += dz1.T @ inputs[branch]
        g_b1 += dz1.sum(axis=0)

    return loss, Gradients(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


# --- optimization ----------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_model(cls, model: ProjectionModel) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in model.params()],
            v=[np.zeros_like(p) for p in model.params()],
        )

    def step(self, model: ProjectionModel, grads: Gradients, config: TrainConfig) -> None:
        self.t += 1
        b1, b2 = config.beta1, config.beta2
        for p, g, m, v in zip(model.params(), grads.arrays(), self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** self.t)
            v_hat = v / (1.0 - b2 ** self.t)
            p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def train(
    model: ProjectionModel,
    triplets: Iterable[Triplet],
    config: TrainConfig,
) -> tuple[ProjectionModel, list[float]]:
    """Mini-batch Adam over the triplet stream; returns (model, epoch losses).

    Deterministic given config.seed: batch shuffling and dropout masks come
    from one seeded generator, and accumulation order is fixed.
    """
    data = list(triplets)
    if not data:
        raise InvalidParamsError("no training triplets")
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_model(model)
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(data), config.batch_size):
            batch = [data[i] for i in order[start:start + config.batch_size]]
            masks = sample_dropout_masks(model, len(batch), rng)
            loss, grads = backward(model, batch, config, dropout_masks=masks)
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {start}"
                )
            state.step(model, grads, config)
            total += loss * len(batch)
        trace.append(total / len(data))
    return model, trace


# --- triplet construction -----------------------------------------------------------

def mine_hard_negatives(
    anchor_description: str,
    candidates: list[MentionRef],
    count: int,
    bm25: Bm25Index,
    rng: np.random.Generator,
    fraction: float = 0.1,
) -> list[MentionRef]:
    """Pick ``count`` negatives: the top BM25-scoring ``fraction`` plus a uniform rest.

    Hardness is BM25 similarity between the anchor's type description and the
    candidate's document text. When no candidate has a positive score the
    whole draw falls back to uniform sampling.
    """
    if not candidates:
        return []
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParamsError("fraction must be in [0, 1]")
    terms = tokenize(anchor_description)
    scored = sorted(
        ((bm25.score(terms, doc_id), (doc_id, span_id)) for doc_id, span_id in candidates),
        key=lambda pair: (-pair[0], pair[1]),
    )
    n_hard = int(round(fraction * count))
    if scored[0][0] <= 0.0:
        n_hard = 0  # nothing lexically similar: uniform fallback
    ranked = [ref for _, ref in scored]
    hard = [ranked[i % len(ranked)] for i in range(n_hard)]
    rest = count - len(hard)
    picked = set(hard)
    pool = [ref for ref in candidates if ref not in picked]
    if not pool:
        pool = list(candidates)
    idx = rng.integers(len(pool), size=rest)
    return hard + [pool[i] for i in idx]


def build_triplets(
    corpus: Corpus,
    store: RepresentationStore,
    key: RepresentationKey,
    anchors: dict[str, tuple[str, np.ndarray]],
    train_types: list[str],
    test_types: list[str],
    per_type: int,
    config: TrainConfig,
    bm25: Bm25Index | None = None,
) -> Iterator[Triplet]:
    """Yield per-type triplets with uniform positives and mined negatives.

    ``anchors`` maps a type name to its (description text, representation
    vector). Train and test type sets must be disjoint; requesting a test
    type raises TypeSplitViolationError so held-out queries can never leak
    into training.
    """
    test_set = set(test_types)
    overlap = set(train_types) & test_set
    if overlap:
        raise TypeSplitViolationError(f"types in both splits: {sorted(overlap)}")
    if bm25 is None:
        bm25 = Bm25Index.build(corpus)
    by_type = corpus.mentions_by_type()
    labels: dict[MentionRef, frozenset[str]] = {}
    all_mentions: list[MentionRef] = []
    for doc in corpus:
        for span in doc.spans:
            ref = (doc.doc_id, span.span_id)
            labels[ref] = span.type_labels
            all_mentions.append(ref)

    rng = np.random.default_rng(config.seed)
    for type_name in sorted(train_types):
        if type_name in test_set:
            raise TypeSplitViolationError(f"type {type_name!r} is held out for testing")
        if type_name not in anchors:
            raise InvalidParamsError(f"no anchor for type {type_name!r}")
        positives_pool = by_type.get(type_name, [])
        if not positives_pool:
            raise TypeWithoutMentionsError(f"type {type_name!r} has no labeled mentions")
        negative_pool = [ref for ref in all_mentions if type_name not in labels[ref]]
        if not negative_pool:
            raise TypeWithoutMentionsError(
                f"no negative candidates for type {type_name!r}: every mention shares it"
            )
        description, anchor_vec = anchors[type_name]
        anchor_vec = np.asarray(anchor_vec, dtype=float)
        pos_idx = rng.integers(len(positives_pool), size=per_type)
        negatives = mine_hard_negatives(
            description, negative_pool, per_type, bm25, rng,
            fraction=config.hard_negative_fraction,
        )
        for i in range(per_type):
            pos_ref = positives_pool[pos_idx[i]]
            neg_ref = negatives[i]
            yield Triplet(
                anchor=anchor_vec,
                positive=np.asarray(store.get(key, *pos_ref), dtype=float),
                negative=np.asarray(store.get(key, *neg_ref), dtype=float),
            )


def span_mentions(corpus: Corpus, include_eos: bool = False) -> list[MentionRef]:
    """All (doc_id, span_id) refs, optionally with per-document EOS refs."""
    refs: list[MentionRef] = []
    for doc in corpus:
        if include_eos:
            refs.append((doc.doc_id, EOS_SPAN_ID))
        else:
            refs.extend((doc.doc_id, s.span_id) for s in doc.spans)
    return refs


# --- checkpoint format ---------------------------------------------------------------

def save_model(model: ProjectionModel, path: str | Path, extra: dict | None = None) -> None:
    """Write magic, length-prefixed JSON header, then float32 LE parameters."""
    header: dict = {
        "in_dim": model.in_dim,
        "hidden_dim": model.hidden_dim,
        "out_dim": model.out_dim,
        "activation": "silu",
        "dropout_rate": model.dropout_rate,
    }
    if extra is not None:
        header["extra"] = extra
    blob = json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for p in model.params():
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_model(path: str | Path) -> tuple[ProjectionModel, dict | None]:
    data = Path(path).read_bytes()
    if data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise CorruptCheckpointError(f"{path}: bad magic")
    pos = len(MODEL_MAGIC)
    if pos + 4 > len(data):
        raise CorruptCheckpointError(f"{path}: truncated header length")
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if pos + hlen > len(data):
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: bad header: {exc}") from None
    pos += hlen
    try:
        in_dim, hidden, out = header["in_dim"], header["hidden_dim"], header["out_dim"]
        dropout = header["dropout_rate"]
    except KeyError as exc:
        raise CorruptCheckpointError(f"{path}: header missing {exc}") from None
    shapes = [(hidden, in_dim), (hidden,), (out, hidden), (out,)]
    params = []
    for shape in shapes:
        n = int(np.prod(shape))
        if pos + 4 * n > len(data):
            raise CorruptCheckpointError(f"{path}: truncated parameters")
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos).astype(float)
        params.append(arr.reshape(shape))
        pos += 4 * n
    if pos != len(data):
        raise CorruptCheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    model = ProjectionModel(w1=params[0], b1=params[1], w2=params[2], b2=params[3],
                            dropout_rate=dropout)
    return model, header.get("extra")
