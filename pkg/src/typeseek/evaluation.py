"""Retrieval evaluation: R-Precision, Precision@K, Wilcoxon significance.

R-Precision for a query is Precision@K with K equal to the number of
relevant documents; reported numbers are macro averages over queries.
System comparisons use a one-sided Wilcoxon signed-rank test over paired
per-query scores, exact for small samples (all 2^n sign assignments via
the rank-sum distribution) and normal-approximated with tie correction
beyond the cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._ranks import rankdata_average
from .corpus import TypeQuery
from .errors import EmptyInputError, EmptyRelevantError, InvalidParamsError, QuerySetMismatchError
from .ranking import RankedResult

EXACT_WILCOXON_CUTOFF = 25
DEFAULT_ALPHA = 0.05


def precision_at_k(ranked: RankedResult, relevant: frozenset[str] | set[str], k: int) -> float:
    """|top-k intersect relevant| / k; short rankings count missing slots as misses."""
    if k < 1:
        raise InvalidParamsError(f"k must be >= 1, got {k}")
    hits = sum(1 for item in ranked.items[:k] if item.doc_id in relevant)
    return hits / k


def r_precision(ranked: RankedResult, relevant: frozenset[str] | set[str]) -> float:
    if not relevant:
        raise EmptyRelevantError("R-Precision undefined: no relevant documents")
    return precision_at_k(ranked, relevant, len(relevant))


# --- Wilcoxon signed-rank ------------------------------------------------------

@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W+ = sum of ranks of positive differences
    p_value: float
    n_nonzero: int
    exact: bool


def _exact_sf(doubled_ranks: list[int], doubled_w: int, tail: str) -> float:
    """Tail probability of the rank-sum null distribution.

    The null assigns each rank an independent random sign; the distribution
    of W+ (sum of positively-signed ranks) is built by dynamic programming
    over all 2^n assignments, using doubled ranks so ties stay integral.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        new = counts[:]
        for s in range(total - r + 1):
            if counts[s]:
                new[s + r] += counts[s]
        counts = new
    denom = 2 ** len(doubled_ranks)
    if tail == "greater":
        favorable = sum(counts[doubled_w:])
    else:  # "less"
        favorable = sum(counts[:doubled_w + 1])
    return favorable / denom


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(
    paired_a,
    paired_b,
    alternative: str = "greater",
    exact_cutoff: int = EXACT_WILCOXON_CUTOFF,
) -> WilcoxonResult:
    """Paired test of whether scores_a exceed scores_b.

    Zero differences are dropped (Wilcoxon's original treatment); tied
    absolute differences receive average ranks. With every difference zero,
    the convention is p = 1.0.
    """
    if alternative not in ("greater", "less", "two-sided"):
        raise InvalidParamsError(f"unknown alternative {alternative!r}")
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.size != b.size or a.size == 0:
        raise EmptyInputError("paired samples must be equal-length and non-empty")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_nonzero=0, exact=True)

    ranks = rankdata_average(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())

    if n <= exact_cutoff:
        doubled = [int(round(2 * r)) for r in ranks]
        dw = int(round(2 * w_plus))
        if alternative == "greater":
            p = _exact_sf(doubled, dw, "greater")
        elif alternative == "less":
            p = _exact_sf(doubled, dw, "less")
        else:
            p = min(1.0, 2.0 * min(_exact_sf(doubled, dw, "greater"),
                                   _exact_sf(doubled, dw, "less")))
        return WilcoxonResult(statistic=w_plus, p_value=p, n_nonzero=n, exact=True)

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: subtract sum(t^3 - t)/48 over tied groups of |diffs|
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    var -= float(((tie_counts ** 3 - tie_counts).sum())) / 48.0
    if var <= 0:
        return WilcoxonResult(statistic=w_plus, p_value=1.0, n_nonzero=n, exact=False)
    z = (w_plus - mean) / math.sqrt(var)
    if alternative == "greater":
        p = _normal_sf(z)
    elif alternative == "less":
        p = _normal_sf(-z)
    else:
        p = min(1.0, 2.0 * _normal_sf(abs(z)))
    return WilcoxonResult(statistic=w_plus, p_value=p, n_nonzero=n, exact=False)


# --- reports -------------------------------------------------------------------

@dataclass
class QueryMetrics:
    query_id: str
    num_relevant: int
    r_precision: float
    precision_at: dict[int, float]


@dataclass
class SystemReport:
    name: str
    rows: list[QueryMetrics]
    macro_r_precision: float
    macro_precision_at: dict[int, float]


@dataclass
class SignificanceEntry:
    system_a: str  # higher macro R-Precision
    system_b: str
    statistic: float
    p_value: float
    alpha: float = DEFAULT_ALPHA
    significant: bool = False


@dataclass
class EvalReport:
    systems: list[SystemReport]
    significance: list[SignificanceEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "systems": [
                {
                    "name": s.name,
                    "macro_r_precision": s.macro_r_precision,
                    "macro_precision_at": {str(k): v for k, v in s.macro_precision_at.items()},
                    "per_query": [
                        {
                            "query_id": r.query_id,
                            "num_relevant": r.num_relevant,
                            "r_precision": r.r_precision,
                            "precision_at": {str(k): v for k, v in r.precision_at.items()},
                        }
                        for r in s.rows
                    ],
                }
                for s in self.systems
            ],
            "significance": [
                {
                    "system_a": e.system_a,
                    "system_b": e.system_b,
                    "statistic": e.statistic,
                    "p_value": e.p_value,
                    "alpha": e.alpha,
                    "significant": e.significant,
                }
                for e in self.significance
            ],
        }


def evaluate_system(
    name: str,
    results: dict[str, RankedResult],
    queries: list[TypeQuery],
    ks: tuple[int, ...] = (50, 200),
) -> SystemReport:
    rows = []
    for q in queries:
        ranked = results.get(q.query_id, RankedResult([]))
        rows.append(
            QueryMetrics(
                query_id=q.query_id,
                num_relevant=len(q.relevant_doc_ids),
                r_precision=r_precision(ranked, q.relevant_doc_ids),
                precision_at={k: precision_at_k(ranked, q.relevant_doc_ids, k) for k in ks},
            )
        )
    macro_r = sum(r.r_precision for r in rows) / len(rows) if rows else 0.0
    macro_p = {
        k: (sum(r.precision_at[k] for r in rows) / len(rows) if rows else 0.0) for k in ks
    }
    return SystemReport(name=name, rows=rows, macro_r_precision=macro_r,
                        macro_precision_at=macro_p)


def compare_systems(
    results_per_system: dict[str, dict[str, RankedResult]],
    queries: list[TypeQuery],
    ks: tuple[int, ...] = (50, 200),
    alpha: float = DEFAULT_ALPHA,
) -> EvalReport:
    """Per-system macro metrics plus best-vs-runner-up significance.

    All systems must cover the same query set. The significance entry tests
    whether the top system's per-query R-Precision exceeds the runner-up's
    (one-sided Wilcoxon).
    """
    if not queries:
        raise EmptyInputError("no queries to evaluate")
    query_ids = {q.query_id for q in queries}
    for name, results in results_per_system.items():
        missing = query_ids - results.keys()
        if missing:
            raise QuerySetMismatchError(
                f"system {name!r} lacks results for queries {sorted(missing)[:5]}"
            )

    reports = [
        evaluate_system(name, results_per_system[name], queries, ks)
        for name in results_per_system
    ]
    reports.sort(key=lambda s: (-s.macro_r_precision, s.name))

    significance = []
    if len(reports) >= 2:
        best, runner = reports[0], reports[1]
        by_query_best = {r.query_id: r.r_precision for r in best.rows}
        by_query_runner = {r.query_id: r.r_precision for r in runner.rows}
        ordered = sorted(query_ids)
        res = wilcoxon_signed_rank(
            [by_query_best[q] for q in ordered],
            [by_query_runner[q] for q in ordered],
            alternative="greater",
        )
        significance.append(
            SignificanceEntry(
                system_a=best.name,
                system_b=runner.name,
                statistic=res.statistic,
                p_value=res.p_value,
                alpha=alpha,
                significant=res.p_value < alpha,
            )
        )
    return EvalReport(systems=reports, significance=significance)
