"""Representation-source selection by type-discrimination AUC.

Protocol: sample entity types and mentions, form balanced same-type /
different-type mention pairs, score each pair by cosine similarity of the
mention vectors at a given (block, component) source, and summarize each
source by the AUC of separating positives from negatives, averaged over
several sampling seeds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._ranks import rankdata_average
from .corpus import Corpus
from .errors import (
    DimMismatchError,
    EmptyInputError,
    InsufficientDataError,
    ZeroVectorError,
)
from .represent import MentionRef, RepresentationKey, RepresentationStore

DEFAULT_TYPES_SAMPLE = 20
DEFAULT_MENTIONS_PER_TYPE = 20
DEFAULT_NUM_SEEDS = 5

Pair = tuple[MentionRef, MentionRef]

_NEGATIVE_SAMPLING_FACTOR = 50  # attempts per requested negative before giving up


@dataclass
class PairSet:
    positives: list[Pair]
    negatives: list[Pair]
    seed: int


@dataclass
class KeyAuc:
    mean_auc: float
    per_seed_aucs: list[float]


@dataclass
class SweepResult:
    per_key: dict[RepresentationKey, KeyAuc]

    def ranked_keys(self) -> list[tuple[RepresentationKey, float]]:
        """Keys by descending mean AUC; key order breaks exact ties."""
        return sorted(
            ((k, v.mean_auc) for k, v in self.per_key.items()),
            key=lambda kv: (-kv[1], kv[0]),
        )


def build_pairs(
    corpus: Corpus,
    types_sample: int = DEFAULT_TYPES_SAMPLE,
    mentions_per_type: int = DEFAULT_MENTIONS_PER_TYPE,
    seed: int = 0,
) -> PairSet:
    """Sample types and mentions, then form balanced positive/negative pairs.

    Positives are all within-type pairs of the sampled mentions; negatives
    are uniformly sampled cross-type pairs whose full label sets are
    disjoint, matched in count to the positives.
    """
    by_type = corpus.mentions_by_type()
    eligible = sorted(t for t, refs in by_type.items() if len(refs) >= mentions_per_type)
    if len(eligible) < types_sample:
        short = sorted(
            (t for t in by_type if t not in eligible),
            key=lambda t: -len(by_type[t]),
        )
        if short:
            worst = short[0]
            raise InsufficientDataError(
                f"type {worst!r} has only {len(by_type[worst])} labeled mentions "
                f"(need {mentions_per_type}); {len(eligible)} of {types_sample} "
                f"requested types are usable"
            )
        raise InsufficientDataError(
            f"corpus has {len(eligible)} types with >= {mentions_per_type} mentions, "
            f"need {types_sample}"
        )

    labels: dict[MentionRef, frozenset[str]] = {}
    for doc in corpus:
        for span in doc.spans:
            labels[(doc.doc_id, span.span_id)] = span.type_labels

    rng = np.random.default_rng(seed)
    chosen_types = [eligible[i] for i in rng.choice(len(eligible), size=types_sample, replace=False)]
    sampled: dict[str, list[MentionRef]] = {}
    for t in chosen_types:
        refs = by_type[t]
        idx = rng.choice(len(refs), size=mentions_per_type, replace=False)
        sampled[t] = [refs[i] for i in idx]

    positives: list[Pair] = []
    for t in chosen_types:
        refs = sampled[t]
        for i in range(len(refs)):
            for j in range(i + 1, len(refs)):
                positives.append((refs[i], refs[j]))

    negatives: list[Pair] = []
    max_attempts = _NEGATIVE_SAMPLING_FACTOR * max(1, len(positives))
    attempts = 0
    while len(negatives) < len(positives):
        attempts += 1
        if attempts > max_attempts:
            raise InsufficientDataError(
                "could not sample enough label-disjoint negative pairs; "
                "types overlap too heavily"
            )
        ti, tj = rng.choice(len(chosen_types), size=2, replace=False)
        a = sampled[chosen_types[ti]][rng.integers(mentions_per_type)]
        b = sampled[chosen_types[tj]][rng.integers(mentions_per_type)]
        if labels[a] & labels[b]:
            continue  # multi-label mentions may share a type; not a negative
        negatives.append((a, b))

    return PairSet(positives=positives, negatives=negatives, seed=seed)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimMismatchError(f"cosine: shapes {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine undefined for an all-zero vector")
    return float(np.dot(u, v) / (nu * nv))


def auc(pos_scores, neg_scores) -> float:
    """Probability a random positive outscores a random negative, ties at 0.5.

    Computed from the Mann-Whitney rank statistic; exactly equals brute-force
    enumeration over all positive/negative pairs.
    """
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise EmptyInputError("auc needs non-empty positive and negative scores")
    ranks = rankdata_average(np.concatenate([pos, neg]))
    rank_sum_pos = float(ranks[: pos.size].sum())
    u = rank_sum_pos - pos.size * (pos.size + 1) / 2.0
    return u / (pos.size * neg.size)


def _pair_scores(store: RepresentationStore, key: RepresentationKey, pairs: list[Pair]) -> np.ndarray:
    out = np.empty(len(pairs), dtype=float)
    for i, (a, b) in enumerate(pairs):
        out[i] = cosine(store.get(key, *a), store.get(key, *b))
    return out


def run_sweep(
    store: RepresentationStore,
    corpus: Corpus,
    keys: list[RepresentationKey],
    seeds: list[int],
    types_sample: int = DEFAULT_TYPES_SAMPLE,
    mentions_per_type: int = DEFAULT_MENTIONS_PER_TYPE,
) -> SweepResult:
    """AUC per representation source, averaged over sampling seeds.

    Pairs depend only on (corpus, seed), so each seed's pair set is shared
    across keys and the result is independent of key order.
    """
    if not keys or not seeds:
        raise EmptyInputError("run_sweep needs at least one key and one seed")
    per_seed: dict[RepresentationKey, list[float]] = {k: [] for k in keys}
    for seed in seeds:
        pairs = build_pairs(corpus, types_sample, mentions_per_type, seed)
        for key in sorted(keys):
            pos = _pair_scores(store, key, pairs.positives)
            neg = _pair_scores(store, key, pairs.negatives)
            per_seed[key].append(auc(pos, neg))
    return SweepResult(
        per_key={
            k: KeyAuc(mean_auc=float(np.mean(v)), per_seed_aucs=v)
            for k, v in per_seed.items()
        }
    )


def export_heatmap_csv(result: SweepResult, path: str | Path) -> None:
    """Component-by-block grid of mean AUCs (components as rows)."""
    keys = sorted(result.per_key)
    blocks = sorted({k.block for k in keys})
    components = sorted({k.component for k in keys})
    cell = {(k.component, k.block): result.per_key[k].mean_auc for k in keys}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component"] + [str(b) for b in blocks])
        for comp in components:
            row: list[str] = [comp]
            for b in blocks:
                v = cell.get((comp, b))
                row.append("" if v is None else f"{v:.6f}")
            writer.writerow(row)


def export_depth_csv(result: SweepResult, path: str | Path, num_blocks: int | None = None) -> None:
    """Long-format export with block index normalized to [0, 1] depth."""
    keys = sorted(result.per_key)
    if num_blocks is None:
        num_blocks = max((k.block for k in keys), default=0) + 1
    denom = max(1, num_blocks - 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "block", "normalized_depth", "mean_auc"])
        for k in keys:
            writer.writerow(
                [k.component, str(k.block), f"{k.block / denom:.6f}",
                 f"{result.per_key[k].mean_auc:.6f}"]
            )
