"""Compiled inner loop of the event-driven simulation.

Metrics are passed in their lowered form (see ``MetricSpec.kernel_params``)
so a single compiled function serves every metric kind.
"""
import math

import numpy as np
from numba import njit

EUCLIDEAN, LP, LP_POW, PHI, DISCRETE, BOUNDED, CUBIC = range(7)


@njit(cache=True)
def rho(a, b, code, p, cap, forms, coefs, params):
    k = a.shape[0]
    if code == EUCLIDEAN or code == BOUNDED:
        s = 0.0
        for i in range(k):
            d = a[i] - b[i]
            s += d * d
        r = math.sqrt(s)
        if code == BOUNDED and r > cap:
            return cap
        return r
    if code == LP:
        if math.isinf(p):
            r = 0.0
            for i in range(k):
                d = abs(a[i] - b[i])
                if d > r:
                    r = d
            return r
        mx = 0.0
        for i in range(k):
            d = abs(a[i] - b[i])
            if d > mx:
                mx = d
        if mx == 0.0:
            return 0.0
        s = 0.0
        for i in range(k):
            s += (abs(a[i] - b[i]) / mx) ** p
        return mx * s ** (1.0 / p)
    if code == LP_POW:
        s = 0.0
        for i in range(k):
            s += abs(a[i] - b[i]) ** p
        return s
    if code == PHI:
        s = 0.0
        for i in range(k):
            d = abs(a[i] - b[i])
            if forms[i] == 0:
                s += coefs[i] * d ** params[i]
            else:
                s += coefs[i] * math.expm1(d / params[i])
        return s
    if code == DISCRETE:
        for i in range(k):
            if a[i] != b[i]:
                return 1.0
        return 0.0
    # cubic
    return abs(a[0] ** 3 - b[0] ** 3)


@njit(cache=True)
def run_events(op, eu, ev, edge_idx, theta, mu, code, p, cap, forms, coefs, params,
               effective, watch_slot, watch_center, watch_max):
    """Apply a block of events in order; returns the number of effective updates.

    ``op`` (n, k) is updated in place. ``effective`` receives one flag per
    event. ``watch_slot[v] >= 0`` marks vertices whose Euclidean distance to
    ``watch_center`` is tracked into ``watch_max[watch_slot[v]]``.
    """
    n_eff = 0
    k = op.shape[1]
    track = watch_max.shape[0] > 0
    for j in range(edge_idx.shape[0]):
        e = edge_idx[j]
        u = eu[e]
        v = ev[e]
        a = op[u]
        b = op[v]
        if rho(a, b, code, p, cap, forms, coefs, params) <= theta:
            for i in range(k):
                ai = a[i]
                bi = b[i]
                a[i] = ai + mu * (bi - ai)
                b[i] = bi + mu * (ai - bi)
            effective[j] = True
            n_eff += 1
            if track:
                for w in (u, v):
                    slot = watch_slot[w]
                    if slot >= 0:
                        s = 0.0
                        for i in range(k):
                            d = op[w, i] - watch_center[i]
                            s += d * d
                        s = math.sqrt(s)
                        if s > watch_max[slot]:
                            watch_max[slot] = s
        else:
            effective[j] = False
    return n_eff


@njit(cache=True)
def neighbor_distances(op, eu, ev, code, p, cap, forms, coefs, params):
    m = eu.shape[0]
    out = np.empty(m)
    for e in range(m):
        out[e] = rho(op[eu[e]], op[ev[e]], code, p, cap, forms, coefs, params)
    return out
