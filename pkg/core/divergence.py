# core/divergence.py
import math

import numpy as np
from scipy.special import rel_entr

from core.errors import EmptyDistribution

LN2 = math.log(2.0)


def jsd_counts(p_counts, q_counts) -> float:
    """
    Base-2 Jensen-Shannon divergence between two count (or weight) vectors
    over the same bins. Result lies in [0, 1].
    """
    p = np.asarray(p_counts, dtype=float)
    q = np.asarray(q_counts, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"count vectors differ in shape: {p.shape} vs {q.shape}")
    p_total, q_total = p.sum(), q.sum()
    if p_total <= 0 or q_total <= 0:
        raise EmptyDistribution("cannot compare an empty distribution")
    p = p / p_total
    q = q / q_total
    m = 0.5 * (p + q)
    value = 0.5 * (rel_entr(p, m).sum() + rel_entr(q, m).sum()) / LN2
    return float(min(1.0, max(0.0, value)))
