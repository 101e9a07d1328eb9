"""Bounded-knapsack DP kernels.

Two interchangeable implementations fill the same table: a numba ``@njit``
loop and a numpy version vectorised over the capacity axis. Set
``TOOLBUDGET_DISABLE_NUMBA=1`` (or run without numba installed) to use the
numpy path.

Each cell keeps the best plan with cost <= j under the lexicographic key
(value desc, cost asc, invocations asc). The key is additive per item, so the
row-by-row recurrence stays exact. A candidate replaces the incumbent only when
strictly better, so full ties keep the smaller multiplicity of the current item.
``values`` may be int64 (exact, pre-scaled) or float64.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = "TOOLBUDGET_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def bounded_knapsack_numpy(costs, values, maxf, capacity):
    """Returns ``(choice, best_value, best_cost, best_count)``.

    ``choice[i, j]`` is the multiplicity of item ``i`` in the best plan over
    items ``0..i`` with capacity ``j``.
    """
    n = costs.shape[0]
    val = np.zeros(capacity + 1, dtype=values.dtype)
    cst = np.zeros(capacity + 1, dtype=np.int64)
    cnt = np.zeros(capacity + 1, dtype=np.int64)
    choice = np.zeros((n, capacity + 1), dtype=np.int32)
    for i in range(n):
        c = int(costs[i])
        v = values[i]
        bv, bc, bn = val.copy(), cst.copy(), cnt.copy()
        bk = choice[i]
        for k in range(1, int(maxf[i]) + 1):
            kc = k * c
            if kc > capacity:
                break
            cv = val[: capacity + 1 - kc] + k * v
            cc = cst[: capacity + 1 - kc] + kc
            cn = cnt[: capacity + 1 - kc] + k
            ov, oc, on = bv[kc:], bc[kc:], bn[kc:]
            better = (cv > ov) | ((cv == ov) & ((cc < oc) | ((cc == oc) & (cn < on))))
            ov[better] = cv[better]
            oc[better] = cc[better]
            on[better] = cn[better]
            bk[kc:][better] = k
        val, cst, cnt = bv, bc, bn
    return choice, val[capacity], int(cst[capacity]), int(cnt[capacity])


def _bounded_knapsack_loops(costs, values, maxf, capacity):
    n = costs.shape[0]
    val = np.zeros(capacity + 1, dtype=values.dtype)
    cst = np.zeros(capacity + 1, dtype=np.int64)
    cnt = np.zeros(capacity + 1, dtype=np.int64)
    nval = np.empty_like(val)
    ncst = np.empty_like(cst)
    ncnt = np.empty_like(cnt)
    choice = np.zeros((n, capacity + 1), dtype=np.int32)
    for i in range(n):
        c = costs[i]
        v = values[i]
        f = maxf[i]
        for j in range(capacity + 1):
            bv = val[j]
            bc = cst[j]
            bn = cnt[j]
            bk = 0
            for k in range(1, f + 1):
                kc = k * c
                if kc > j:
                    break
                p = j - kc
                cv = val[p] + k * v
                cc = cst[p] + kc
                cn = cnt[p] + k
                if cv > bv or (cv == bv and (cc < bc or (cc == bc and cn < bn))):
                    bv = cv
                    bc = cc
                    bn = cn
                    bk = k
            nval[j] = bv
            ncst[j] = bc
            ncnt[j] = bn
            choice[i, j] = bk
        val, nval = nval, val
        cst, ncst = ncst, cst
        cnt, ncnt = ncnt, cnt
    return choice, val[capacity], cst[capacity], cnt[capacity]


if HAVE_NUMBA:
    _bounded_knapsack_jit = njit(cache=True, nogil=True)(_bounded_knapsack_loops)

    def bounded_knapsack_numba(costs, values, maxf, capacity):
        choice, v, c, n = _bounded_knapsack_jit(costs, values, maxf, capacity)
        return choice, v, int(c), int(n)
else:  # pragma: no cover
    bounded_knapsack_numba = None


def bounded_knapsack(costs, values, maxf, capacity):
    """Dispatch to the numba kernel unless disabled or unavailable."""
    costs = np.ascontiguousarray(costs, dtype=np.int64)
    maxf = np.ascontiguousarray(maxf, dtype=np.int64)
    values = np.ascontiguousarray(values)
    if values.dtype not in (np.int64, np.float64):
        values = values.astype(np.float64)
    capacity = int(capacity)
    if HAVE_NUMBA and not numba_disabled():
        return bounded_knapsack_numba(costs, values, maxf, capacity)
    return bounded_knapsack_numpy(costs, values, maxf, capacity)


def backend_name() -> str:
    return "numba" if HAVE_NUMBA and not numba_disabled() else "numpy"
