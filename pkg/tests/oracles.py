"""Independent reference implementations used to check the production code.

Nothing here imports from the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def enumerate_best(capacity, items):
    """Exhaustive bounded-knapsack optimum.

    ``items`` is a list of ``(tool_id, cost, value, max_freq)``. Returns
    ``(best_value, frequencies)`` with exact Fraction values; ties resolved the
    same documented way (lower cost, then fewer calls) with any remaining tie
    returned as the set of all tied frequency vectors.
    """
    ranges = [range(0, max_freq + 1) for (_, _, _, max_freq) in items]
    best = None
    tied = []
    for combo in itertools.product(*ranges):
        cost = sum(k * c for k, (_, c, _, _) in zip(combo, items))
        if cost > capacity:
            continue
        value = sum((k * Fraction(v) for k, (_, _, v, _) in zip(combo, items)), Fraction(0))
        key = (value, -cost, -sum(combo))
        if best is None or key > best:
            best = key
            tied = [combo]
        elif key == best:
            tied.append(combo)
    freqs = [{it[0]: k for it, k in zip(items, combo)} for combo in tied]
    return best[0], -best[1], freqs


def naive_expected_value(sims, scores):
    """Weighted average of scores with weights exp(sim), summed directly."""
    num = sum(math.exp(s) * x for s, x in zip(sims, scores))
    den = sum(math.exp(s) for s in sims)
    return num / den


def naive_frequency(rows):
    """``rows`` are (query_id, sim, count) for every record; one term per distinct query."""
    seen = {}
    for qid, sim, count in rows:
        seen.setdefault(qid, (sim, count))
    num = sum(math.exp(s) * c for s, c in seen.values())
    den = sum(math.exp(s) for s, _ in seen.values())
    return num / den


def scaled_costs(costs, budget, epsilon, max_steps):
    """Direct evaluation of the integer scaling with exact rationals."""
    lam = Fraction(max_steps + 1) / Fraction(epsilon)
    return [math.ceil(lam * Fraction(c)) for c in costs], math.floor(lam * Fraction(budget)), lam
