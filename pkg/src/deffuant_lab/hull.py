"""Distances between convex hulls of finite point sets.

Every route works on the implicit Minkowski difference
``conv(A) - conv(B) = conv{a_i - b_j}`` through its linear minimization
oracle ``argmin_z <g, z> = a[argmin A g] - b[argmax B g]``, so the
``|A| * |B|`` difference points are never formed.

Routes
------
euclidean   Wolfe's minimum-norm-point method (finite, exact up to round-off)
l1, linf    linear program (HiGHS)
other       convex descent over mixing weights from several starts, with a
            Frank-Wolfe duality gap as a certified lower bound
k = 1       interval arithmetic (exact for metrics monotone in |x - y|)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from .metrics import MetricError, MetricSpec, pairwise

DEFAULT_TOL = 1e-9
N_STARTS = 32


class UnsupportedMetricError(MetricError):
    """Hull minimization is not available for this metric."""


@dataclass(frozen=True)
class HullDistance:
    value: float
    lower_bound: float
    method: str

    @property
    def certified_error(self) -> float:
        return self.value - self.lower_bound


def _lmo(A, B, g):
    i = int(np.argmin(A @ g))
    j = int(np.argmax(B @ g))
    return A[i] - B[j]


def _affine_min_norm(S):
    """Weights (summing to 1) of the min-norm point of the affine hull of rows of S."""
    r = len(S)
    M = np.zeros((r + 1, r + 1))
    M[:r, :r] = S @ S.T
    M[:r, r] = 1.0
    M[r, :r] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    return np.linalg.lstsq(M, rhs, rcond=None)[0][:r]


def wolfe_distance(A, B, tol: float = 1e-13, max_iter: int = 10_000) -> HullDistance:
    """Euclidean distance between conv(A) and conv(B) by Wolfe's method."""
    scale = max(1.0, float(np.abs(A).max()), float(np.abs(B).max()))
    eps = tol * scale
    S = [_lmo(A, B, A.mean(axis=0) - B.mean(axis=0))]
    lam = np.ones(1)
    x = S[0].copy()
    lb = 0.0
    for _ in range(max_iter):
        nx = float(np.linalg.norm(x))
        if nx <= eps:
            return HullDistance(nx, 0.0, "wolfe")
        q = _lmo(A, B, x)
        lb = max(lb, float(x @ q) / nx)
        if nx - lb <= eps or any(np.array_equal(q, s) for s in S):
            break
        S.append(q)
        lam = np.append(lam, 0.0)
        while True:
            Sm = np.array(S)
            alpha = _affine_min_norm(Sm)
            if np.all(alpha > 1e-15):
                lam = alpha
                break
            neg = alpha <= 1e-15
            step = np.min(lam[neg] / (lam[neg] - alpha[neg]))
            lam = (1 - step) * lam + step * alpha
            keep = lam > 1e-15
            if not keep.any():
                keep[np.argmax(lam)] = True
            S = [s for s, kk in zip(S, keep) if kk]
            lam = lam[keep] / lam[keep].sum()
        x = lam @ np.array(S)
    nx = float(np.linalg.norm(x))
    return HullDistance(nx, min(max(lb, 0.0), nx), "wolfe")


def lp_distance(A, B, p: float) -> HullDistance:
    """Exact l1 or l-infinity hull distance as a linear program."""
    na, k = A.shape
    nb = len(B)
    # variables: lam (na), mu (nb), slack (k for l1, 1 for linf)
    ns = k if p == 1 else 1
    nv = na + nb + ns
    c = np.zeros(nv)
    c[na + nb:] = 1.0
    Z = np.hstack([A.T, -B.T])  # z = Z @ [lam, mu]
    S = np.eye(k) if p == 1 else np.ones((k, 1))
    A_ub = np.vstack([np.hstack([Z, -S]), np.hstack([-Z, -S])])
    b_ub = np.zeros(2 * k)
    A_eq = np.zeros((2, nv))
    A_eq[0, :na] = 1.0
    A_eq[1, na:na + nb] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0, 1.0],
                  bounds=[(0, None)] * nv, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"hull LP failed: {res.message}")
    lam = np.clip(res.x[:na], 0, None)
    mu = np.clip(res.x[na:na + nb], 0, None)
    z = lam @ A / lam.sum() - mu @ B / mu.sum()
    val = float(np.abs(z).sum() if p == 1 else np.abs(z).max())
    # dual objective; b_ub = 0 so only the two simplex rows contribute
    lb = float(np.sum(res.eqlin.marginals))
    return HullDistance(val, min(max(lb, 0.0), val), "lp")


def _smooth_objective(m: MetricSpec, p: float | None):
    """Convex objective F(z) in rho units (after ``finish``) and its gradient."""
    if m.kind == "phi":
        comps = m.phi

        def F(z):
            return float(sum(c(abs(z[i])) for i, c in enumerate(comps)))

        def grad(z):
            g = np.empty_like(z)
            for i, c in enumerate(comps):
                s = abs(z[i])
                if c.form == "power":
                    d = c.coef * c.param * s ** (c.param - 1) if s > 0 or c.param > 1 else c.coef
                else:
                    d = c.coef / c.param * math.exp(s / c.param)
                g[i] = d * np.sign(z[i])
            return g

        return F, grad, (lambda f: f), (lambda f: f)

    def F(z):
        return float(np.sum(np.abs(z) ** p))

    def grad(z):
        return p * np.abs(z) ** (p - 1) * np.sign(z)

    return F, grad, (lambda f: max(f, 0.0) ** (1.0 / p)), (lambda r: r**p)


def descent_distance(A, B, m: MetricSpec, p: float | None = None, tol: float = DEFAULT_TOL,
                     n_starts: int = N_STARTS, rng_seed: int = 0) -> HullDistance:
    """Convex hull distance for a smooth convex objective by multistart descent.

    Each start runs SLSQP over the two weight simplices; the Frank-Wolfe gap
    ``<grad F(z), z - s>`` at the result bounds ``F(z) - F*`` and gives a
    certified lower bound. Stops early once the certified error is below
    ``tol``.
    """
    na, nb = len(A), len(B)
    # rescale so the objective does not under/overflow for large p
    scale = max(float(np.abs(A).max()), float(np.abs(B).max()), 1e-300) if m.kind != "phi" else 1.0
    As, Bs = A / scale, B / scale
    F, grad, finish, _ = _smooth_objective(m, p)

    def obj(w):
        z = w[:na] @ As - w[na:] @ Bs
        g = grad(z)
        return F(z), np.concatenate([As @ g, -(Bs @ g)])

    cons = [{"type": "eq", "fun": lambda w: w[:na].sum() - 1.0,
             "jac": lambda w: np.concatenate([np.ones(na), np.zeros(nb)])},
            {"type": "eq", "fun": lambda w: w[na:].sum() - 1.0,
             "jac": lambda w: np.concatenate([np.zeros(na), np.ones(nb)])}]
    rng = np.random.default_rng(rng_seed)
    best_val, best_lb = None, 0.0
    for s in range(n_starts):
        if s == 0:
            w0 = np.concatenate([np.full(na, 1 / na), np.full(nb, 1 / nb)])
        else:
            w0 = np.concatenate([rng.dirichlet(np.ones(na)), rng.dirichlet(np.ones(nb))])
        res = minimize(obj, w0, jac=True, method="SLSQP", bounds=[(0, 1)] * (na + nb),
                       constraints=cons, options={"ftol": 1e-16, "maxiter": 1000})
        w = np.clip(res.x, 0, None)
        lam, mu = w[:na] / w[:na].sum(), w[na:] / w[na:].sum()
        z = lam @ As - mu @ Bs
        f = F(z)
        g = grad(z)
        gap = max(float(g @ z - g @ _lmo(As, Bs, g)), 0.0)
        val = finish(f) * scale
        lb = finish(max(f - gap, 0.0)) * scale
        # convexity: every start's certificate bounds the global optimum
        best_val = val if best_val is None else min(best_val, val)
        best_lb = max(best_lb, lb)
        if best_val - best_lb <= tol:
            break
    return HullDistance(best_val, min(best_lb, best_val), "descent")


def interval_distance(A, B, m: MetricSpec) -> HullDistance:
    """k = 1: distance between the closest endpoints, 0 if the intervals meet."""
    a1, a2 = float(A.min()), float(A.max())
    b1, b2 = float(B.min()), float(B.max())
    if a2 < b1:
        x, y = a2, b1
    elif b2 < a1:
        x, y = b2, a1
    else:
        return HullDistance(0.0, 0.0, "interval")
    v = float(pairwise(m, np.array([[x]]), np.array([[y]]))[0])
    return HullDistance(v, v, "interval")


def check_supported(m: MetricSpec) -> None:
    if m.kind == "discrete":
        raise UnsupportedMetricError("hull distance is undefined for the discrete metric")
    if m.kind == "lp_pow" and m.p < 1:
        raise UnsupportedMetricError("lp_pow with p < 1 has non-convex balls; hull distance unsupported")


def hull_distance_bounds(A, B, m: MetricSpec, tol: float = DEFAULT_TOL) -> HullDistance:
    """Minimum of ``rho(x, y)`` over ``x`` in conv(A), ``y`` in conv(B)."""
    check_supported(m)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise MetricError("hulls live in different dimensions")
    if len(A) == 1 and len(B) == 1:
        v = float(pairwise(m, A, B)[0])
        return HullDistance(v, v, "points")
    if A.shape[1] == 1:
        return interval_distance(A, B, m)
    kind, p = m.kind, m.p
    if kind == "cubic":
        raise MetricError("cubic metric is defined only for k = 1")
    if kind == "euclidean" or (kind == "lp" and p == 2):
        return wolfe_distance(A, B)
    if kind == "bounded_euclid":
        r = wolfe_distance(A, B)
        return HullDistance(min(r.value, m.cap), min(r.lower_bound, m.cap), r.method)
    if kind in ("lp", "lp_pow"):
        if p == 1 or math.isinf(p):
            r = lp_distance(A, B, p)
        elif p == 2:
            r = wolfe_distance(A, B)
        else:
            tol_p = tol if kind == "lp" else tol / max(1.0, p)
            r = descent_distance(A, B, m, p=p, tol=tol_p)
        if kind == "lp_pow":
            # rho_p = (l_p distance)^p is a monotone transform: same minimizer
            return HullDistance(r.value**p, r.lower_bound**p, r.method)
        return r
    if kind == "phi":
        return descent_distance(A, B, m, tol=tol)
    raise UnsupportedMetricError(kind)


def hull_distance(A, B, m: MetricSpec, tol: float = DEFAULT_TOL) -> float:
    return hull_distance_bounds(A, B, m, tol).value


def euclid_reach(m: MetricSpec, r: float, k: int) -> float:
    """Largest Euclidean separation compatible with ``rho <= r``.

    Used to discard far-apart clusters before any hull computation.
    """
    kind, p = m.kind, m.p
    if r < 0:
        return 0.0
    if kind == "euclidean":
        return r
    if kind == "bounded_euclid":
        return math.inf if r >= m.cap else r
    if kind in ("lp", "lp_pow"):
        rr = r if kind == "lp" else r ** (1.0 / p)
        if math.isinf(p):
            return rr * math.sqrt(k)
        return rr * k ** max(0.0, 0.5 - 1.0 / p)
    if kind == "cubic":
        # |x^3 - y^3| >= |x - y|^3 / 4 on the real line
        return (4.0 * r) ** (1.0 / 3.0)
    if kind == "phi":
        inv = []
        for c in m.phi:
            if c.form == "power":
                inv.append((r / c.coef) ** (1.0 / c.param))
            else:
                inv.append(c.param * math.log1p(r / c.coef))
        return math.sqrt(k) * max(inv)
    return math.inf
