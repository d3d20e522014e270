"""Distance measures on opinion space and randomized checkers for their properties.

A :class:`MetricSpec` is declarative: it names a metric family plus its
parameters, so it can be serialized to JSON and lowered to the compact numeric
encoding used by the simulation kernel.

The property checkers (weak convexity, local domination, coordinate
sensitivity) are sampling based. A counterexample is conclusive; a pass only
means that nothing was found in the stated number of samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._reals import format_real, parse_real

KINDS = ("euclidean", "lp", "lp_pow", "phi", "discrete", "bounded_euclid", "cubic")

# numeric kind codes shared with the simulation kernel
KIND_CODES = {kind: code for code, kind in enumerate(KINDS)}

# p above this is treated as the max-norm
P_INF_CUTOFF = 1e6

# component forms for the phi metric: c * s**a, or c * (exp(s / a) - 1)
PHI_FORMS = ("power", "expm1")

IDENTITY_TOL = 1e-15


class MetricError(ValueError):
    """Raised for malformed metric specifications or dimension mismatches."""


@dataclass(frozen=True)
class PhiComponent:
    """Convex 1-D building block ``phi_i`` with ``phi_i(0) = 0``.

    ``form="power"`` evaluates ``coef * s**param`` (``param >= 1``),
    ``form="expm1"`` evaluates ``coef * (exp(s / param) - 1)``.
    """

    form: str = "power"
    coef: float = 1.0
    param: float = 1.0

    def __post_init__(self):
        if self.form not in PHI_FORMS:
            raise MetricError(f"unknown phi component form {self.form!r}")
        if not self.coef > 0:
            raise MetricError("phi component coefficient must be positive")
        if self.form == "power" and not self.param >= 1:
            raise MetricError("power component needs exponent >= 1 to be convex")
        if self.form == "expm1" and not self.param > 0:
            raise MetricError("expm1 component needs a positive scale")

    def __call__(self, s):
        s = np.abs(s)
        if self.form == "power":
            return self.coef * s**self.param
        return self.coef * np.expm1(s / self.param)


@dataclass(frozen=True)
class MetricSpec:
    """Declarative description of a distance measure on R^k.

    Parameters
    ----------
    kind : str
        One of ``euclidean``, ``lp``, ``lp_pow``, ``phi``, ``discrete``,
        ``bounded_euclid`` or ``cubic``.
    p : float
        Exponent for ``lp`` (``p >= 1``, ``math.inf`` allowed) and ``lp_pow``
        (``p > 0``).
    cap : float
        Saturation level for ``bounded_euclid``.
    phi : tuple of PhiComponent
        One component per coordinate for ``phi``.
    declared_weakly_convex, declared_locally_dominated : bool
        Claimed properties; the checkers in this module test the claims.
    """

    kind: str = "euclidean"
    p: float = 2.0
    cap: float = 1.0
    phi: tuple = field(default_factory=tuple)
    declared_weakly_convex: bool = True
    declared_locally_dominated: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MetricError(f"unknown metric kind {self.kind!r}")
        if self.kind == "lp":
            if not (self.p >= 1):
                raise MetricError("lp metric needs p >= 1 (or inf)")
            if self.p > P_INF_CUTOFF:
                object.__setattr__(self, "p", math.inf)
        if self.kind == "lp_pow" and not (0 < self.p < math.inf):
            raise MetricError("lp_pow metric needs 0 < p < inf")
        if self.kind == "bounded_euclid" and not self.cap > 0:
            raise MetricError("bounded_euclid needs a positive cap")
        if self.kind == "phi":
            if not self.phi:
                raise MetricError("phi metric needs at least one component")
            object.__setattr__(self, "phi", tuple(self.phi))

    @property
    def required_dim(self):
        """Dimension the metric is tied to, or ``None`` if any k works."""
        if self.kind == "cubic":
            return 1
        if self.kind == "phi":
            return len(self.phi)
        return None

    @property
    def is_convex_family(self) -> bool:
        """True for kinds whose hulls can be separated by convex minimization."""
        if self.kind in ("euclidean", "lp", "phi", "cubic", "bounded_euclid"):
            return True
        return self.kind == "lp_pow" and self.p >= 1

    def __call__(self, x, y) -> float:
        return metric_distance(self, x, y)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("lp", "lp_pow"):
            d["p"] = "inf" if math.isinf(self.p) else format_real(float(self.p))
        if self.kind == "bounded_euclid":
            d["cap"] = format_real(float(self.cap))
        if self.kind == "phi":
            d["phi"] = [
                {"form": c.form, "coef": format_real(float(c.coef)), "param": format_real(float(c.param))}
                for c in self.phi
            ]
        d["declared_weakly_convex"] = self.declared_weakly_convex
        d["declared_locally_dominated"] = self.declared_locally_dominated
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSpec":
        kind = d.get("kind", "euclidean")
        kwargs = {"kind": kind}
        if "p" in d:
            kwargs["p"] = parse_real(d["p"])
        if "cap" in d:
            kwargs["cap"] = parse_real(d["cap"])
        if "phi" in d:
            kwargs["phi"] = tuple(
                PhiComponent(c.get("form", "power"), parse_real(c.get("coef", 1.0)),
                             parse_real(c.get("param", 1.0)))
                for c in d["phi"]
            )
        defaults = _declared_defaults(kind, kwargs.get("p", 2.0))
        kwargs["declared_weakly_convex"] = bool(d.get("declared_weakly_convex", defaults[0]))
        kwargs["declared_locally_dominated"] = bool(
            d.get("declared_locally_dominated", defaults[1]))
        return cls(**kwargs)

    def kernel_params(self):
        """Lower to ``(code, p, cap, phi_forms, phi_coefs, phi_params)`` for numba."""
        forms = np.array([PHI_FORMS.index(c.form) for c in self.phi], dtype=np.int64)
        coefs = np.array([c.coef for c in self.phi], dtype=np.float64)
        params = np.array([c.param for c in self.phi], dtype=np.float64)
        p = self.p if not math.isinf(self.p) else np.inf
        return KIND_CODES[self.kind], float(p), float(self.cap), forms, coefs, params


def _declared_defaults(kind, p):
    convex = kind != "lp_pow" or p >= 1
    # cubic is dominated on every bounded set, which is all a finite run sees
    dominated = kind != "discrete" and (kind != "lp_pow" or p >= 1)
    return convex, dominated


def euclidean() -> MetricSpec:
    return MetricSpec("euclidean")


def lp(p: float) -> MetricSpec:
    return MetricSpec("lp", p=p)


def lp_pow(p: float) -> MetricSpec:
    return MetricSpec("lp_pow", p=p, declared_weakly_convex=p >= 1,
                      declared_locally_dominated=p >= 1)


def discrete() -> MetricSpec:
    return MetricSpec("discrete", declared_locally_dominated=False)


def bounded_euclid(cap: float = 1.0) -> MetricSpec:
    return MetricSpec("bounded_euclid", cap=cap)


def cubic() -> MetricSpec:
    # dominated on bounded sets only
    return MetricSpec("cubic")


def phi(components: Sequence[PhiComponent]) -> MetricSpec:
    return MetricSpec("phi", phi=tuple(components))


def as_opinion(x) -> np.ndarray:
    """Return ``x`` as a finite 1-D float array (an opinion vector)."""
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if a.ndim != 1 or a.size < 1:
        raise MetricError("an opinion is a non-empty 1-D vector")
    if not np.all(np.isfinite(a)):
        raise MetricError("opinion coordinates must be finite")
    return a


def metric_distance(m: MetricSpec, x, y) -> float:
    """Distance ``rho(x, y)`` between two opinion vectors under metric ``m``."""
    x = as_opinion(x)
    y = as_opinion(y)
    if x.shape != y.shape:
        raise MetricError(f"dimension mismatch: {x.size} vs {y.size}")
    req = m.required_dim
    if req is not None and x.size != req:
        raise MetricError(f"{m.kind} metric is defined only for k = {req}")
    return float(pairwise(m, x[None, :], y[None, :])[0])


def pairwise(m: MetricSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise distances ``rho(X[i], Y[i])`` for equally shaped ``(n, k)`` arrays."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    kind = m.kind
    if kind == "cubic":
        return np.abs(X[:, 0] ** 3 - Y[:, 0] ** 3)
    if kind == "discrete":
        return np.any(X != Y, axis=1).astype(np.float64)
    D = np.abs(X - Y)
    if kind == "euclidean":
        return np.sqrt(np.einsum("ij,ij->i", D, D))
    if kind == "bounded_euclid":
        return np.minimum(np.sqrt(np.einsum("ij,ij->i", D, D)), m.cap)
    if kind == "lp":
        if math.isinf(m.p):
            return D.max(axis=1)
        if m.p == 1:
            return D.sum(axis=1)
        if m.p == 2:
            return np.sqrt(np.einsum("ij,ij->i", D, D))
        # scale by the max entry to avoid overflow in D**p
        s = D.max(axis=1)
        safe = np.where(s > 0, s, 1.0)
        return s * ((D / safe[:, None]) ** m.p).sum(axis=1) ** (1.0 / m.p)
    if kind == "lp_pow":
        return (D**m.p).sum(axis=1)
    if kind == "phi":
        if D.shape[1] != len(m.phi):
            raise MetricError("phi metric dimension mismatch")
        return sum(c(D[:, i]) for i, c in enumerate(m.phi))
    raise MetricError(kind)


def to_point(m: MetricSpec, x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Distances from one point ``x`` to every row of ``Y``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    return pairwise(m, np.broadcast_to(np.asarray(x, dtype=np.float64), Y.shape), Y)


# ---------------------------------------------------------------------------
# property checkers
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    """Outcome of a randomized property check.

    ``holds`` is the boolean classification, ``label`` a short verdict name,
    ``witness`` the evidence (counterexample, plateau pair or ratio ladder)
    and ``n_samples``/``seed`` record how the evidence was gathered.
    """

    holds: bool
    label: str
    n_samples: int
    seed: int
    witness: object = None
    estimate: float | None = None

    def __bool__(self):
        return self.holds

    def describe(self) -> str:
        if self.label == "pass":
            return f"no counterexample found in {self.n_samples} samples (seed {self.seed})"
        return f"{self.label} (samples {self.n_samples}, seed {self.seed})"


def _box_bounds(box, k=None):
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=np.float64)) for b in box)
    if k is not None and lo.size == 1 and k > 1:
        lo = np.full(k, lo[0])
        hi = np.full(k, hi[0])
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise MetricError("sample box is empty")
    return lo, hi


def check_weak_convexity(m: MetricSpec, box, n_samples: int = 100_000, rng_seed: int = 0,
                         tol: float = 1e-9, k: int | None = None) -> Verdict:
    """Search for ``rho(x, a*y + (1-a)*z) > max(rho(x, y), rho(x, z))``.

    ``box`` is a pair ``(lo, hi)`` of per-coordinate bounds; ``k`` broadcasts
    scalar bounds. Returns a failing :class:`Verdict` whose witness is the
    first violating ``(x, y, z, alpha)`` exceeding ``tol``.
    """
    if n_samples < 1:
        raise MetricError("n_samples must be >= 1")
    lo, hi = _box_bounds(box, k or m.required_dim)
    rng = np.random.default_rng(rng_seed)
    dim = lo.size
    chunk = 20_000
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        X, Y, Z = (lo + (hi - lo) * rng.random((n, dim)) for _ in range(3))
        alpha = rng.random(n)
        W = alpha[:, None] * Y + (1 - alpha[:, None]) * Z
        lhs = pairwise(m, X, W)
        rhs = np.maximum(pairwise(m, X, Y), pairwise(m, X, Z))
        bad = np.flatnonzero(lhs > rhs + tol)
        if bad.size:
            i = bad[0]
            return Verdict(False, "counterexample", done + i + 1, rng_seed,
                           witness=(X[i], Y[i], Z[i], float(alpha[i])),
                           estimate=float(lhs[i] - rhs[i]))
        done += n
    return Verdict(True, "pass", n_samples, rng_seed)


def check_local_domination(m: MetricSpec, gamma: float = 1.0, box=(-1.0, 1.0),
                           n_samples: int = 2_000, rng_seed: int = 0, rungs: int = 6,
                           k: int | None = None) -> Verdict:
    """Estimate ``c`` in ``rho(x, y) <= c * |x - y|_2`` for Euclidean-close pairs.

    The search walks a ladder of rungs ``j = 0..rungs-1``. Rung ``j`` draws
    ``n_samples * 2**j`` pairs with ``x`` in ``box`` and Euclidean separation
    in ``[0.9, 1] * gamma * 20**-j`` along a random direction, and records the
    largest ratio ``rho / |x - y|_2``. If that maximum grows by more than 10x
    between every pair of successive rungs the ratio is unbounded near the
    diagonal and the verdict is ``violated`` with the ladder as witness;
    otherwise the verdict is ``dominated`` with ``estimate = c_hat``, the
    largest ratio seen.
    """
    if not gamma > 0:
        raise MetricError("gamma must be positive")
    lo, hi = _box_bounds(box, k or m.required_dim)
    rng = np.random.default_rng(rng_seed)
    dim = lo.size
    ladder = []
    total = 0
    for j in range(rungs):
        n = n_samples * 2**j
        total += n
        X = lo + (hi - lo) * rng.random((n, dim))
        u = rng.standard_normal((n, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = gamma * 20.0**-j * (0.9 + 0.1 * rng.random(n))
        Y = X + r[:, None] * u
        ratios = pairwise(m, X, Y) / np.linalg.norm(X - Y, axis=1)
        i = int(np.argmax(ratios))
        ladder.append((X[i], Y[i], float(ratios[i])))
    maxima = np.array([w[2] for w in ladder])
    c_hat = float(maxima.max())
    if rungs > 1 and np.all(maxima[1:] > 10.0 * maxima[:-1]):
        return Verdict(False, "violated", total, rng_seed, witness=ladder, estimate=c_hat)
    return Verdict(True, "dominated", total, rng_seed, witness=ladder, estimate=c_hat)


def _min_rho_with_separation(m, i, s, dim, rng, starts=24, sweeps=60):
    """Approximately minimize ``rho(x, y)`` subject to ``|x_i - y_i| > s``.

    Free variables are ``x`` and the off-axis part of ``d = y - x``; the
    constrained coordinate is pinned at ``d_i = s * (1 + 1e-12)``.
    """
    s_eff = s * (1 + 1e-12)
    best = (math.inf, None, None)

    def objective(x, d):
        return float(pairwise(m, x[None, :], (x + d)[None, :])[0])

    for start in range(starts):
        x = rng.uniform(-1.0, 1.0, dim) * s * (start % 3)
        if start % 4 == 0:
            x[i] = -s_eff / 2
        d = rng.standard_normal(dim) * s * (0.0 if start == 0 else 1.0)
        d[i] = s_eff
        f = objective(x, d)
        step = s
        for _ in range(sweeps):
            improved = False
            for vec, idx in [(x, j) for j in range(dim)] + [(d, j) for j in range(dim) if j != i]:
                for sign in (1.0, -1.0):
                    old = vec[idx]
                    vec[idx] = old + sign * step
                    f_new = objective(x, d)
                    if f_new < f:
                        f = f_new
                        improved = True
                        break
                    vec[idx] = old
            if not improved:
                step *= 0.5
                if step < 1e-9 * max(s, 1.0):
                    break
        if f < best[0]:
            best = (f, x.copy(), (x + d).copy())
    return best


def check_coordinate_sensitivity(m: MetricSpec, i: int, s_grid: Sequence[float], k: int = 2,
                                 rng_seed: int = 0) -> Verdict:
    """Decide whether ``rho`` blows up when coordinate ``i`` (1-based) separates.

    For each ``s`` in the increasing grid the smallest ``rho(x, y)`` with
    ``|x_i - y_i| > s`` is searched by random restarts plus coordinate
    descent. The metric is judged sensitive when these minima increase along
    the grid and the last exceeds ten times the first; otherwise the pair
    attaining the final minimum is returned as the plateau witness.
    """
    dim = m.required_dim or k
    if not 1 <= i <= dim:
        raise MetricError(f"coordinate index {i} out of range 1..{dim}")
    s_grid = [float(s) for s in s_grid]
    if any(s <= 0 for s in s_grid) or any(b <= a for a, b in zip(s_grid, s_grid[1:])):
        raise MetricError("s_grid must be positive and increasing")
    rng = np.random.default_rng(rng_seed)
    envelope = []
    pair = None
    for s in s_grid:
        f, x, y = _min_rho_with_separation(m, i - 1, s, dim, rng)
        envelope.append(f)
        pair = (x, y)
    env = np.array(envelope)
    increasing = bool(np.all(np.diff(env) > 0))
    if increasing and env[-1] > 10 * env[0]:
        return Verdict(True, "sensitive", len(s_grid), rng_seed,
                       witness=list(zip(s_grid, envelope)), estimate=float(env[-1]))
    return Verdict(False, "insensitive", len(s_grid), rng_seed,
                   witness={"envelope": list(zip(s_grid, envelope)), "pair": pair},
                   estimate=float(env[-1]))


def check_metric_axioms(m: MetricSpec, box=(-1.0, 1.0), n_samples: int = 100_000,
                        rng_seed: int = 0, k: int | None = None, tol: float = 1e-12) -> Verdict:
    """Sample symmetry, identity and triangle inequality on random triples."""
    lo, hi = _box_bounds(box, k or m.required_dim)
    rng = np.random.default_rng(rng_seed)
    X, Y, Z = (lo + (hi - lo) * rng.random((n_samples, lo.size)) for _ in range(3))
    dxy = pairwise(m, X, Y)
    if not np.array_equal(dxy, pairwise(m, Y, X)):
        return Verdict(False, "asymmetric", n_samples, rng_seed)
    if np.any(pairwise(m, X, X) > IDENTITY_TOL) or np.any(dxy <= 0):
        return Verdict(False, "identity", n_samples, rng_seed)
    slack = pairwise(m, X, Z) - dxy - pairwise(m, Y, Z)
    scale = 1.0 + np.abs(dxy)
    bad = np.flatnonzero(slack > tol * scale)
    if bad.size:
        j = bad[0]
        return Verdict(False, "triangle", n_samples, rng_seed, witness=(X[j], Y[j], Z[j]))
    return Verdict(True, "pass", n_samples, rng_seed)
