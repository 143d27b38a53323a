"""Average-tie ranking shared by the AUC and Wilcoxon statistics."""

from __future__ import annotations

import numpy as np


def rankdata_average(values) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their positions.

    Tied groups get ranks that are integers or exact halves, so downstream
    rank sums stay exactly representable in binary floating point.
    """
    a = np.asarray(values, dtype=float)
    n = a.size
    order = np.argsort(a, kind="stable")
    ranks = np.empty(n, dtype=float)
    sorted_vals = a[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # positions i..j hold ranks i+1..j+1; their mean is (i + j + 2) / 2
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks
