"""Initial opinion distributions with closed-form mean, support and radius."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import norm, qmc

from ._reals import format_real, parse_real
from .metrics import MetricSpec, euclidean, to_point

DIST_KINDS = ("finite_atoms", "bernoulli_product", "uniform_sphere", "uniform_box", "mixed_1d")

PROB_TOL = 1e-12

# corner enumeration limit for product supports
MAX_ENUM_DIM = 20


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSpec:
    """An i.i.d. initial opinion law on R^k.

    Use the module-level constructors (:func:`finite_atoms`,
    :func:`bernoulli_product`, ...) rather than filling fields by hand.
    ``dropped_mass`` records probability that a truncated catalog entry moved
    onto an accumulation point of the original support.
    """

    kind: str
    k: int
    points: tuple = ()
    probs: tuple = ()
    p: float = 0.5
    lo: tuple = ()
    hi: tuple = ()
    atom_at: float = 0.0
    atom_mass: float = 0.0
    dropped_mass: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise DistributionError(f"unknown distribution kind {self.kind!r}")
        if self.k < 1:
            raise DistributionError("dimension must be >= 1")
        if self.kind == "finite_atoms":
            if len(self.points) != len(self.probs) or not self.points:
                raise DistributionError("finite_atoms needs matching points and probabilities")
            if any(len(pt) != self.k for pt in self.points):
                raise DistributionError("atom dimension mismatch")
            if any(q < 0 for q in self.probs) or abs(math.fsum(self.probs) - 1) > PROB_TOL:
                raise DistributionError("atom probabilities must be >= 0 and sum to 1")
        elif self.kind == "bernoulli_product":
            if not 0 < self.p < 1:
                raise DistributionError("bernoulli parameter must lie in (0, 1)")
        elif self.kind == "uniform_box":
            if len(self.lo) != self.k or len(self.hi) != self.k:
                raise DistributionError("box bounds must have one entry per coordinate")
            if any(h <= l for l, h in zip(self.lo, self.hi)):
                raise DistributionError("box needs lo < hi in every coordinate")
        elif self.kind == "mixed_1d":
            if self.k != 1:
                raise DistributionError("mixed_1d is one-dimensional")
            if not 0 <= self.atom_mass <= 1:
                raise DistributionError("atom_mass must lie in [0, 1]")
            if self.hi[0] <= self.lo[0]:
                raise DistributionError("density interval needs lo < hi")

    # -- catalog queries ------------------------------------------------
    def mean(self) -> np.ndarray:
        return distribution_mean(self)

    def radius(self, m: MetricSpec | None = None) -> float:
        return distribution_radius(self, m or euclidean())

    def support(self) -> "SupportDescription":
        return support_of(self)

    def sample(self, n: int, rng_seed=0) -> np.ndarray:
        return sample_initial(self, n, rng_seed)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        d = {"kind": self.kind, "k": self.k}
        if self.kind == "finite_atoms":
            d["atoms"] = [{"point": [format_real(float(c)) for c in pt], "prob": format_real(float(q))}
                          for pt, q in zip(self.points, self.probs)]
        elif self.kind == "bernoulli_product":
            d["p"] = format_real(float(self.p))
        elif self.kind == "uniform_box":
            d["lo"] = [format_real(float(v)) for v in self.lo]
            d["hi"] = [format_real(float(v)) for v in self.hi]
        elif self.kind == "mixed_1d":
            d.update(atom_at=format_real(float(self.atom_at)), atom_mass=format_real(float(self.atom_mass)),
                     lo=format_real(float(self.lo[0])), hi=format_real(float(self.hi[0])))
        if self.label:
            d["label"] = self.label
        if self.dropped_mass:
            d["dropped_mass"] = format_real(float(self.dropped_mass))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        kind = d.get("kind")
        label = d.get("label", "")
        if kind == "finite_atoms":
            pts = [[parse_real(c) for c in a["point"]] for a in d["atoms"]]
            probs = [parse_real(a["prob"]) for a in d["atoms"]]
            dist = finite_atoms(pts, probs, label=label)
            if "dropped_mass" in d:
                dist = replace(dist, dropped_mass=parse_real(d["dropped_mass"]))
            return dist
        if kind == "ln2":
            return ln2_truncated(int(d.get("n_atoms", 40)))
        if kind == "bernoulli_product":
            return bernoulli_product(int(d["k"]), parse_real(d["p"]))
        if kind == "uniform_sphere":
            return uniform_sphere(int(d["k"]))
        if kind == "uniform_box":
            lo = d["lo"] if isinstance(d["lo"], list) else [d["lo"]] * int(d.get("k", 1))
            hi = d["hi"] if isinstance(d["hi"], list) else [d["hi"]] * int(d.get("k", 1))
            return uniform_box([parse_real(v) for v in lo], [parse_real(v) for v in hi])
        if kind == "mixed_1d":
            return mixed_1d(parse_real(d["atom_at"]), parse_real(d["atom_mass"]),
                            parse_real(d["lo"]), parse_real(d["hi"]))
        raise DistributionError(f"unknown distribution kind {kind!r}")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def finite_atoms(points, probs=None, label: str = "") -> DistributionSpec:
    """Point masses at ``points`` (scalars or vectors); uniform if ``probs`` is None."""
    pts = [tuple(float(c) for c in np.atleast_1d(pt)) for pt in points]
    if probs is None:
        probs = [1.0 / len(pts)] * len(pts)
    return DistributionSpec("finite_atoms", k=len(pts[0]), points=tuple(pts),
                            probs=tuple(float(q) for q in probs), label=label)


def ln2_truncated(n_atoms: int = 40) -> DistributionSpec:
    """Atoms ``1/n`` with mass ``2**-n`` for ``n <= n_atoms``.

    The dropped tail mass ``2**-n_atoms`` sits on the accumulation point 0,
    which belongs to the support of the untruncated law. The mean then
    differs from ln 2 only by the tail sum ``sum_{n > n_atoms} 1/(n 2^n)``.
    """
    pts = [0.0] + [1.0 / n for n in range(1, n_atoms + 1)]
    probs = [2.0**-n_atoms] + [2.0**-n for n in range(1, n_atoms + 1)]
    d = finite_atoms(pts, probs, label=f"ln2[{n_atoms}]")
    return replace(d, dropped_mass=2.0**-n_atoms)


def bernoulli_product(k: int, p: float) -> DistributionSpec:
    """Independent Bernoulli(p) coordinates; support is the hypercube {0,1}^k."""
    return DistributionSpec("bernoulli_product", k=int(k), p=float(p), label=f"hypercube[k={k},p={p}]")


def uniform_sphere(k: int) -> DistributionSpec:
    """Uniform law on the Euclidean unit sphere S^(k-1)."""
    return DistributionSpec("uniform_sphere", k=int(k), label=f"sphere[k={k}]")


def uniform_box(lo, hi) -> DistributionSpec:
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    return DistributionSpec("uniform_box", k=len(lo), lo=lo, hi=hi)


def mixed_1d(atom_at: float, atom_mass: float, lo: float, hi: float) -> DistributionSpec:
    """Point mass ``atom_mass`` at ``atom_at`` plus uniform density on ``[lo, hi]``."""
    return DistributionSpec("mixed_1d", k=1, atom_at=float(atom_at), atom_mass=float(atom_mass),
                            lo=(float(lo),), hi=(float(hi),))


def figure1(shift: float = 2.0) -> DistributionSpec:
    """Uniform law on {(s,1,0), (s,-1,0), (-s,0,1), (-s,0,-1)}."""
    s = float(shift)
    return finite_atoms([(s, 1, 0), (s, -1, 0), (-s, 0, 1), (-s, 0, -1)],
                        label=f"figure1[s={s}]")


def mu_example() -> DistributionSpec:
    """Three atoms (0,0), (1,0), (1/pi,1) where attainability depends on mu."""
    return finite_atoms([(0, 0), (1, 0), (1 / math.pi, 1)], label="mu_critical")


# ---------------------------------------------------------------------------
# support
# ---------------------------------------------------------------------------

@dataclass
class SupportDescription:
    """Support of an initial law: a finite point set or an analytic set.

    Finite supports carry ``points``; analytic ones carry a ``discretizer``
    mapping ``m`` to ``m`` points lying in the support, and ``spacing(m)``
    giving the discretization's largest nearest-neighbour gap.
    """

    kind: str
    tag: str
    points: np.ndarray | None = None
    discretizer: Callable[[int], np.ndarray] | None = None
    spacing: Callable[[int], float] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite_points"

    def discretize(self, m: int | None = None) -> np.ndarray:
        if self.is_finite:
            return self.points
        if m is None:
            raise DistributionError(f"support {self.tag} is analytic; pass a point count")
        pts = self.discretizer(int(m))
        assert len(pts) == m
        return pts


def _hypercube(k):
    if k > MAX_ENUM_DIM:
        raise DistributionError(f"corner enumeration limited to k <= {MAX_ENUM_DIM}")
    return np.array(list(itertools.product((0.0, 1.0), repeat=k)))


def _box_corners(lo, hi):
    lo, hi = np.asarray(lo), np.asarray(hi)
    return lo + _hypercube(lo.size) * (hi - lo)


def sphere_points(k: int, m: int) -> np.ndarray:
    """``m`` deterministic, well spread points on S^(k-1)."""
    if k == 2:
        ang = 2 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if k == 3:
        i = np.arange(m) + 0.5
        z = 1 - 2 * i / m
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5**0.5) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    u = qmc.Halton(d=k, scramble=False).random(m + 1)[1:]
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _nn_spacing(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].max())


def support_of(d: DistributionSpec) -> SupportDescription:
    if d.kind == "finite_atoms":
        pts = np.array([pt for pt, q in zip(d.points, d.probs) if q > 0])
        return SupportDescription("finite_points", d.label or "atoms", points=pts)
    if d.kind == "bernoulli_product":
        return SupportDescription("finite_points", "hypercube", points=_hypercube(d.k))
    if d.kind == "uniform_sphere":
        if d.k == 1:
            return SupportDescription("finite_points", "sphere[k=1]", points=np.array([[-1.0], [1.0]]))
        if d.k == 2:
            spacing = lambda m: 2 * math.sin(math.pi / m)  # noqa: E731
        else:
            spacing = lambda m: _nn_spacing(sphere_points(d.k, m))  # noqa: E731
        return SupportDescription("analytic", f"sphere[k={d.k}]",
                                  discretizer=lambda m: sphere_points(d.k, m), spacing=spacing)
    if d.kind == "uniform_box":
        lo, hi = np.array(d.lo), np.array(d.hi)
        if d.k == 1:
            disc = lambda m: np.linspace(lo[0], hi[0], m)[:, None]  # noqa: E731
            spacing = lambda m: float(hi[0] - lo[0]) / (m - 1)  # noqa: E731
        else:
            def disc(m):
                corners = _box_corners(lo, hi)
                if m < len(corners):
                    raise DistributionError(f"need at least {len(corners)} points for a {d.k}-box")
                fill = qmc.Halton(d=d.k, scramble=False).random(m - len(corners) + 1)[1:]
                return np.vstack([corners, lo + fill * (hi - lo)])
            spacing = lambda m: _nn_spacing(disc(m))  # noqa: E731
        return SupportDescription("analytic", "box", discretizer=disc, spacing=spacing)
    if d.kind == "mixed_1d":
        lo, hi = d.lo[0], d.hi[0]
        if d.atom_mass == 1:
            return SupportDescription("finite_points", "atom", points=np.array([[d.atom_at]]))

        def disc(m):
            grid = np.linspace(lo, hi, m - 1 if d.atom_mass > 0 else m)
            if d.atom_mass > 0:
                grid = np.append(grid, d.atom_at)
            return np.sort(grid)[:, None]
        return SupportDescription("analytic", "mixed_1d", discretizer=disc,
                                  spacing=lambda m: _nn_spacing(disc(m)))
    raise DistributionError(d.kind)


# ---------------------------------------------------------------------------
# mean, radius, sampling
# ---------------------------------------------------------------------------

def distribution_mean(d: DistributionSpec) -> np.ndarray:
    """Closed-form expectation of the law."""
    if d.kind == "finite_atoms":
        pts = np.array(d.points)
        return np.array([math.fsum(q * pt[j] for pt, q in zip(pts, d.probs)) for j in range(d.k)])
    if d.kind == "bernoulli_product":
        return np.full(d.k, d.p)
    if d.kind == "uniform_sphere":
        return np.zeros(d.k)
    if d.kind == "uniform_box":
        return (np.array(d.lo) + np.array(d.hi)) / 2
    if d.kind == "mixed_1d":
        w = d.atom_mass
        return np.array([w * d.atom_at + (1 - w) * (d.lo[0] + d.hi[0]) / 2])
    raise DistributionError(d.kind)


def _sphere_radius(k: int, m: MetricSpec) -> float:
    if m.kind == "euclidean":
        return 1.0
    if m.kind in ("lp", "lp_pow"):
        p = m.p
        # sup of |x|_p on the Euclidean unit sphere
        r = 1.0 if p >= 2 else k ** (1 / p - 0.5)
        return r if m.kind == "lp" else r**p
    if m.kind == "bounded_euclid":
        return min(1.0, m.cap)
    if m.kind == "discrete":
        return 1.0
    if k == 1:
        return float(to_point(m, np.zeros(1), np.array([[-1.0], [1.0]])).max())
    # no closed form: dense discretization
    return float(to_point(m, np.zeros(k), sphere_points(k, 20_000)).max())


def distribution_radius(d: DistributionSpec, m: MetricSpec | None = None) -> float:
    """``sup {rho(E eta0, x) : x in supp}``; ``math.inf`` for unbounded laws.

    Finite supports and hypercubes are enumerated exactly, Euclidean
    hypercubes and spheres use closed forms, and boxes are maximized over
    their corners (exact for metrics with convex balls).
    """
    m = m or euclidean()
    mean = distribution_mean(d)
    if not np.all(np.isfinite(mean)):
        return math.inf
    if d.kind == "finite_atoms":
        return float(to_point(m, mean, support_of(d).points).max())
    if d.kind == "bernoulli_product":
        if m.kind == "euclidean":
            return math.sqrt(d.k) * max(d.p, 1 - d.p)
        return float(to_point(m, mean, _hypercube(d.k)).max())
    if d.kind == "uniform_sphere":
        return _sphere_radius(d.k, m)
    if d.kind == "uniform_box":
        if not (np.all(np.isfinite(d.lo)) and np.all(np.isfinite(d.hi))):
            return math.inf
        if m.kind == "euclidean":
            return float(np.linalg.norm(np.array(d.hi) - np.array(d.lo)) / 2)
        return float(to_point(m, mean, _box_corners(d.lo, d.hi)).max())
    if d.kind == "mixed_1d":
        cand = []
        if d.atom_mass > 0:
            cand.append(d.atom_at)
        if d.atom_mass < 1:
            cand += [d.lo[0], d.hi[0]]
        return float(to_point(m, mean, np.array(cand)[:, None]).max())
    raise DistributionError(d.kind)


def sample_initial(d: DistributionSpec, n: int, rng_seed=0) -> np.ndarray:
    """Draw ``n`` i.i.d. opinions as an ``(n, k)`` array.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if n < 1:
        raise DistributionError("n must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if d.kind == "finite_atoms":
        pts = np.array(d.points, dtype=np.float64)
        probs = np.array(d.probs)
        idx = rng.choice(len(pts), size=n, p=probs / probs.sum())
        return pts[idx]
    if d.kind == "bernoulli_product":
        return (rng.random((n, d.k)) < d.p).astype(np.float64)
    if d.kind == "uniform_sphere":
        if d.k == 1:
            return np.where(rng.random((n, 1)) < 0.5, -1.0, 1.0)
        g = rng.standard_normal((n, d.k))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    if d.kind == "uniform_box":
        lo, hi = np.array(d.lo), np.array(d.hi)
        return lo + (hi - lo) * rng.random((n, d.k))
    if d.kind == "mixed_1d":
        atom = rng.random(n) < d.atom_mass
        vals = rng.uniform(d.lo[0], d.hi[0], n)
        return np.where(atom, d.atom_at, vals)[:, None]
    raise DistributionError(d.kind)


def support_contains(d: DistributionSpec, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Membership test of points in the (closed) support, used to validate discretizers."""
    pts = np.atleast_2d(pts)
    if d.kind == "uniform_sphere":
        return np.abs(np.linalg.norm(pts, axis=1) - 1) <= tol
    if d.kind == "uniform_box":
        return np.all((pts >= np.array(d.lo) - tol) & (pts <= np.array(d.hi) + tol), axis=1)
    if d.kind == "mixed_1d":
        x = pts[:, 0]
        inside = (x >= d.lo[0] - tol) & (x <= d.hi[0] + tol) if d.atom_mass < 1 else False
        return inside | (np.abs(x - d.atom_at) <= tol) if d.atom_mass > 0 else inside
    sup = support_of(d).points
    dist = np.min(np.linalg.norm(pts[:, None, :] - sup[None, :, :], axis=2), axis=1)
    return dist <= tol

