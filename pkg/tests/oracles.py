"""Independent reference implementations used only by the tests.

Each oracle is written from the problem statement with no shared code
from the package beyond plain data containers.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def brute_force_routing(kinds, dist, remaining, rewards, accepted, m, d, t, horizon):
    """Enumerate every accept subset and every visiting order.

    Returns ``(objective, route)`` of the best feasible plan, or ``None``
    when no plan serves all pre-accepted and on-board orders in time.
    """
    n = len(kinds)
    v = kinds.index("V")
    p = kinds.index("P")
    r = kinds.index("R")
    fresh = [i for i in range(n) if kinds[i] == "D" and not accepted[i]]
    held = [i for i in range(n) if kinds[i] == "D" and accepted[i]]
    onboard = [i for i in range(n) if kinds[i] == "T"]
    best = None
    for size in range(len(fresh) + 1):
        for chosen in itertools.combinations(fresh, size):
            stops = [p] + held + onboard + list(chosen)
            served = held + list(chosen)
            for perm in itertools.permutations(stops):
                seq = [v, *perm, r]
                clock = d * len(chosen)
                ok = True
                seen_p = False
                length = 0.0
                for a, b in zip(seq, seq[1:]):
                    clock += d + dist[a][b] * t
                    length += dist[a][b]
                    if b == p:
                        seen_p = True
                    if kinds[b] == "D" and not seen_p:
                        ok = False
                        break
                    if kinds[b] in ("D", "T") and clock > remaining[b]:
                        ok = False
                        break
                if not ok or clock > horizon:
                    continue
                obj = math.fsum(rewards[i] for i in served) - m * length
                if best is None or obj > best[0] + 1e-12:
                    best = (obj, seq)
    return best


def brute_force_insertion(route, stop):
    """Cheapest insertion by trying every gap; earliest gap wins ties."""
    def man(a, b):
        return abs(a[0] - b[0]) + abs(a[1] - b[1])

    def length(rt):
        return sum(man(a, b) for a, b in zip(rt, rt[1:]))

    base = length(route)
    best = None
    for pos in range(1, len(route)):
        cand = list(route[:pos]) + [stop] + list(route[pos:])
        added = length(cand) - base
        if best is None or added < best[0]:
            best = (added, pos)
    return best


def numeric_gradients(loss_fn, params, eps=1e-6):
    """Central finite differences of ``loss_fn()`` w.r.t. every array in ``params``."""
    grads = []
    for arr in params:
        g = np.zeros_like(arr, dtype=np.float64)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            keep = arr[idx]
            arr[idx] = keep + eps
            up = loss_fn()
            arr[idx] = keep - eps
            down = loss_fn()
            arr[idx] = keep
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads
