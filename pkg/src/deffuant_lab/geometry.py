"""Reachable opinion set D_theta, its merge timeline, gap h and predicted theta_c.

For a finite support, ``D_theta`` is built as a fixpoint: start from the
support points as singleton clusters, link every two clusters whose hulls
are within ``theta`` (closed rule, distance <= theta), replace each linked
group by the hull of its union, and repeat until nothing links. Sweeping
theta upwards through the successive minimal inter-cluster distances gives
the merge timeline; its last threshold is the gap ``h``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .distributions import DistributionSpec, distribution_mean, distribution_radius, support_of
from .hull import (DEFAULT_TOL, UnsupportedMetricError, check_supported, euclid_reach,
                   hull_distance_bounds, wolfe_distance)
from .metrics import MetricSpec, euclidean, pairwise

__all__ = ["ConvexCluster", "ComponentDecomposition", "MergeTimeline", "FlatnessReport",
           "Prediction", "UnsupportedMetricError", "hull_distance", "components_at",
           "merge_timeline", "largest_gap", "predict", "predicted_theta_c", "epsilon_flat",
           "flat_vertices", "interval_components"]

# clusters are linked when their distance is <= theta + TIE_TOL * max(1, theta)
TIE_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9
# above this many clusters candidate pairs come from a k-d tree
DENSE_LIMIT = 1500
# default point counts for analytic supports
DEFAULT_DISCRETIZATION = {1: 2001, 2: 10_000, 3: 2000}
DEFAULT_DISCRETIZATION_HIGH_DIM = 1000


def _tie(theta: float) -> float:
    return TIE_TOL * max(1.0, abs(theta))


@dataclass(frozen=True, eq=False)
class ConvexCluster:
    """Convex hull of a finite, non-empty set of generators (rows)."""

    generators: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=np.float64))
        if g.size == 0:
            raise ValueError("a cluster needs at least one generator")
        object.__setattr__(self, "generators", _reduce(g))

    @property
    def k(self) -> int:
        return self.generators.shape[1]

    @property
    def center(self) -> np.ndarray:
        g = self.generators
        return 0.5 * (g.min(axis=0) + g.max(axis=0))

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.generators - self.center, axis=1).max())

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        """Euclidean hull membership up to ``tol``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.k == 1:
            return bool(self.generators.min() - tol <= x[0, 0] <= self.generators.max() + tol)
        return wolfe_distance(self.generators, x).value <= tol

    def union(self, *others: "ConvexCluster") -> "ConvexCluster":
        return ConvexCluster(np.vstack([self.generators] + [o.generators for o in others]))

    def to_list(self) -> list:
        return self.generators.tolist()


def _reduce(g: np.ndarray) -> np.ndarray:
    """Drop generators that are not hull vertices (exactly when cheap)."""
    if len(g) == 1:
        return g
    if g.shape[1] == 1:
        return np.array([[g.min()], [g.max()]]) if g.min() < g.max() else g[:1]
    g = np.unique(g, axis=0)
    if len(g) <= g.shape[1] + 1 or g.shape[1] > 6:
        return g
    try:
        return g[np.sort(ConvexHull(g).vertices)]
    except QhullError:
        # lower-dimensional hull: keep every generator
        return g


def hull_distance(A, B, m: MetricSpec | None = None, tol: float = DEFAULT_TOL) -> float:
    """Minimum of ``rho(x, y)`` over the two hulls (clusters or point arrays)."""
    a = A.generators if isinstance(A, ConvexCluster) else A
    b = B.generators if isinstance(B, ConvexCluster) else B
    return hull_distance_bounds(a, b, m or euclidean(), tol).value


@dataclass
class ComponentDecomposition:
    theta: float
    clusters: list[ConvexCluster]
    metric: MetricSpec
    min_separation: float = math.inf
    at_jump: bool = False

    @property
    def n_components(self) -> int:
        return len(self.clusters)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "metric": self.metric.to_dict(),
                "n_components": self.n_components, "at_jump": self.at_jump,
                "min_separation": None if math.isinf(self.min_separation) else self.min_separation,
                "clusters": [c.to_list() for c in self.clusters]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def locate(self, x) -> int | None:
        """Index of the cluster whose hull contains ``x``, if any."""
        for i, c in enumerate(self.clusters):
            if c.contains(x):
                return i
        return None


@dataclass
class MergeTimeline:
    """``component_counts[0]`` holds below ``thresholds[0]``;
    ``component_counts[i + 1]`` holds on ``[thresholds[i], thresholds[i + 1])``."""

    thresholds: list[float]
    component_counts: list[int]
    metric: MetricSpec = field(default_factory=euclidean)

    def count_at(self, theta: float) -> int:
        i = int(np.searchsorted(np.asarray(self.thresholds), theta + _tie(theta), side="right"))
        return self.component_counts[i]

    def to_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "component_counts": list(self.component_counts),
                "metric": self.metric.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_rows(self):
        yield ("threshold", "components_after")
        for t, c in zip(self.thresholds, self.component_counts[1:]):
            yield (repr(float(t)), c)


# ---------------------------------------------------------------------------
# fixpoint engine
# ---------------------------------------------------------------------------

class _ClusterSet:
    """Current clusters with cached pairwise hull distances."""

    def __init__(self, points: np.ndarray, m: MetricSpec, tol: float):
        check_supported(m)
        self.m = m
        self.tol = tol
        self.k = points.shape[1]
        pts = np.unique(points, axis=0)
        self.clusters: dict[int, ConvexCluster] = {i: ConvexCluster(p) for i, p in enumerate(pts)}
        self.next_id = len(pts)
        self.cache: dict[tuple[int, int], float] = {}

    def __len__(self):
        return len(self.clusters)

    def _arrays(self):
        ids = np.fromiter(self.clusters, dtype=np.int64)
        cs = [self.clusters[i] for i in ids]
        centers = np.array([c.center for c in cs])
        radii = np.array([c.radius for c in cs])
        return ids, cs, centers, radii

    def _candidates(self, r: float):
        """Index pairs (into the id array) whose bounding balls allow rho <= r."""
        ids, cs, centers, radii = self._arrays()
        e = euclid_reach(self.m, r, self.k)
        n = len(ids)
        if math.isinf(e) or n <= DENSE_LIMIT:
            iu, ju = np.triu_indices(n, 1)
            if not math.isinf(e):
                gap = np.linalg.norm(centers[iu] - centers[ju], axis=1) - radii[iu] - radii[ju]
                keep = gap <= e * (1 + 1e-9) + 1e-12
                iu, ju = iu[keep], ju[keep]
            return ids, cs, iu, ju
        big = radii > e
        pairs = set()
        small = np.flatnonzero(~big)
        if len(small) > 1:
            reach = 2 * (radii[small].max() if len(small) else 0.0) + e
            tree = cKDTree(centers[small])
            for a, b in tree.query_pairs(reach * (1 + 1e-9) + 1e-12, output_type="ndarray"):
                pairs.add((int(small[a]), int(small[b])))
        for bi in np.flatnonzero(big):
            gap = np.linalg.norm(centers - centers[bi], axis=1) - radii - radii[bi]
            for j in np.flatnonzero(gap <= e * (1 + 1e-9) + 1e-12):
                if j != bi:
                    pairs.add((int(min(bi, j)), int(max(bi, j))))
        if not pairs:
            z = np.zeros(0, dtype=np.int64)
            return ids, cs, z, z
        arr = np.array(sorted(pairs), dtype=np.int64)
        return ids, cs, arr[:, 0], arr[:, 1]

    def _distances(self, ids, cs, iu, ju) -> np.ndarray:
        out = np.empty(len(iu))
        single = np.array([len(c.generators) == 1 for c in cs], dtype=bool)
        both = single[iu] & single[ju]
        if both.any():
            P = np.array([cs[i].generators[0] for i in iu[both]])
            Q = np.array([cs[j].generators[0] for j in ju[both]])
            out[both] = pairwise(self.m, P, Q)
        for t in np.flatnonzero(~both):
            a, b = int(ids[iu[t]]), int(ids[ju[t]])
            key = (a, b) if a < b else (b, a)
            d = self.cache.get(key)
            if d is None:
                d = hull_distance_bounds(cs[iu[t]].generators, cs[ju[t]].generators,
                                         self.m, self.tol).value
                self.cache[key] = d
            out[t] = d
        return out

    def pairs_within(self, r: float):
        ids, cs, iu, ju = self._candidates(r)
        if len(iu) == 0:
            return ids, iu, ju, np.zeros(0)
        d = self._distances(ids, cs, iu, ju)
        keep = d <= r
        return ids, iu[keep], ju[keep], d[keep]

    def min_distance(self) -> float:
        """Exact minimum hull distance over all current cluster pairs."""
        ids, cs, centers, radii = self._arrays()
        n = len(ids)
        if n < 2:
            return math.inf
        # upper bound from each cluster's nearest centre, then all pairs below it
        kq = min(n, 4)
        _, nn = cKDTree(centers).query(centers, k=kq)
        iu = np.repeat(np.arange(n), kq - 1)
        ju = nn[:, 1:].ravel()
        ok = iu != ju
        upper = float(self._distances(ids, cs, iu[ok], ju[ok]).min())
        _, _, _, d = self.pairs_within(upper + _tie(upper))
        return float(d.min()) if len(d) else upper

    def merge_within(self, r: float) -> bool:
        ids, iu, ju, _ = self.pairs_within(r)
        if len(iu) == 0:
            return False
        ds = DisjointSet(range(len(ids)))
        for a, b in zip(iu, ju):
            ds.merge(int(a), int(b))
        for group in ds.subsets():
            if len(group) < 2:
                continue
            members = [int(ids[g]) for g in group]
            merged = ConvexCluster(np.vstack([self.clusters[i].generators for i in members]))
            for i in members:
                del self.clusters[i]
            self.clusters[self.next_id] = merged
            self.next_id += 1
        return True

    def close(self, theta: float) -> None:
        r = theta + _tie(theta)
        while self.merge_within(r):
            pass


def _as_points(support) -> np.ndarray:
    pts = np.asarray(support, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise ValueError("support is empty")
    return pts


def components_at(support, theta: float, m: MetricSpec | None = None,
                  tol: float = DEFAULT_TOL) -> ComponentDecomposition:
    """Connected components of D_theta for a finite support.

    Raises
    ------
    UnsupportedMetricError
        For metrics without a hull distance (discrete, lp_pow with p < 1).
    """
    m = m or euclidean()
    if not theta >= 0:
        raise ValueError("theta must be non-negative")
    cs = _ClusterSet(_as_points(support), m, tol)
    cs.close(theta)
    sep = cs.min_distance()
    clusters = sorted(cs.clusters.values(), key=lambda c: tuple(c.center))
    # a jump sits at theta if some link happened at distance ~theta
    at_jump = False
    probe = _ClusterSet(_as_points(support), m, tol)
    probe.close(theta - MEMBERSHIP_TOL)
    at_jump = len(probe) != len(cs)
    return ComponentDecomposition(theta, clusters, m, sep, at_jump)


def merge_timeline(support, m: MetricSpec | None = None, tol: float = DEFAULT_TOL) -> MergeTimeline:
    """Thresholds at which the component count of D_theta drops.

    Event-driven: the next threshold is the smallest current inter-cluster
    distance; at that threshold the chain-reaction closure is rerun before
    the count is recorded.
    """
    m = m or euclidean()
    pts = _as_points(support)
    if pts.shape[1] == 1:
        return _interval_timeline(pts[:, 0], m)
    cs = _ClusterSet(pts, m, tol)
    thresholds, counts = [], [len(cs)]
    while len(cs) > 1:
        t = cs.min_distance()
        cs.close(t)
        thresholds.append(t)
        counts.append(len(cs))
    return MergeTimeline(thresholds, counts, m)


def largest_gap(support, m: MetricSpec | None = None, tol: float = DEFAULT_TOL) -> float:
    """Gap h: the last merge threshold (0 for a single point)."""
    tl = merge_timeline(support, m, tol)
    return tl.thresholds[-1] if tl.thresholds else 0.0


# ---------------------------------------------------------------------------
# k = 1 fast path
# ---------------------------------------------------------------------------

def _gaps_1d(x: np.ndarray, m: MetricSpec) -> np.ndarray:
    check_supported(m)
    return pairwise(m, x[:-1, None], x[1:, None])


def _interval_timeline(x: np.ndarray, m: MetricSpec) -> MergeTimeline:
    # on the line convexification adds nothing: clusters are intervals and
    # the closest pair is always adjacent, so the timeline is the sorted gaps
    x = np.unique(x)
    gaps = np.sort(_gaps_1d(x, m)) if len(x) > 1 else np.zeros(0)
    thresholds, counts = [], [len(x)]
    i = 0
    while i < len(gaps):
        t = float(gaps[i])
        j = int(np.searchsorted(gaps, t + _tie(t), side="right"))
        thresholds.append(t)
        counts.append(counts[-1] - (j - i))
        i = j
    return MergeTimeline(thresholds, counts, m)


def interval_components(x, theta: float, m: MetricSpec | None = None) -> list[tuple[float, float]]:
    """k = 1 components as closed intervals ``(lo, hi)``."""
    m = m or euclidean()
    x = np.unique(np.asarray(x, dtype=np.float64).ravel())
    if len(x) == 1:
        return [(float(x[0]), float(x[0]))]
    cut = np.flatnonzero(_gaps_1d(x, m) > theta + _tie(theta))
    starts = np.concatenate(([0], cut + 1))
    ends = np.concatenate((cut, [len(x) - 1]))
    return [(float(x[a]), float(x[b])) for a, b in zip(starts, ends)]


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

@dataclass
class Prediction:
    radius: float
    gap: float
    theta_c: float
    rule: str
    n_support_points: int
    discretization_m: int | None = None
    chord_spacing: float | None = None
    dropped_mass: float = 0.0
    note: str = ""

    def to_dict(self) -> dict:
        def f(x):
            return "inf" if isinstance(x, float) and math.isinf(x) else x
        return {k: f(v) for k, v in self.__dict__.items()}


def _default_m(k: int) -> int:
    return DEFAULT_DISCRETIZATION.get(k, DEFAULT_DISCRETIZATION_HIGH_DIM)


def predict(d: DistributionSpec, m: MetricSpec | None = None,
            discretization_m: int | None = None) -> Prediction:
    """Radius, gap and predicted critical bound ``max(R, h)``.

    Analytic supports are discretized with ``discretization_m`` points; the
    reported gap is then h(m), with the discretization's nearest-neighbour
    spacing as its error bar.
    """
    m = m or euclidean()
    R = distribution_radius(d, m)
    if math.isinf(R):
        return Prediction(R, math.nan, math.inf,
                          "unbounded support: no consensus for every theta", 0,
                          note="no finite theta_c; almost surely no consensus")
    check_supported(m)
    sup = support_of(d)
    spacing = None
    mm = None
    if sup.is_finite:
        pts = sup.points
    else:
        mm = int(discretization_m or _default_m(d.k))
        pts = sup.discretize(mm)
        spacing = float(sup.spacing(mm))
    h = largest_gap(pts, m)
    if m.kind == "euclidean" and d.k == 1:
        rule = "theta_c = max(E - a, b - E, largest gap)"
    elif m.kind == "euclidean":
        rule = "theta_c = max(R, h)"
    else:
        rule = "theta_c = max(R_rho, h_rho) (weakly convex, locally dominated metric)"
    note = ""
    if not (m.declared_weakly_convex and m.declared_locally_dominated):
        note = "metric lacks declared weak convexity or local domination; prediction not covered"
    return Prediction(float(R), float(h), float(max(R, h)), rule, len(pts), mm, spacing,
                      float(d.dropped_mass or 0.0), note)


def predicted_theta_c(d: DistributionSpec, m: MetricSpec | None = None,
                      discretization_m: int | None = None) -> float:
    """``max(R, h)``; ``inf`` when the support is unbounded."""
    return predict(d, m, discretization_m).theta_c


# ---------------------------------------------------------------------------
# epsilon-flatness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatnessReport:
    vertex: int
    epsilon: float
    side: str
    horizon: int
    holds_up_to_horizon: bool
    worst_distance: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _window_sums(config: np.ndarray, horizon: int, periodic: bool):
    n = len(config)
    if periodic:
        if 2 * horizon + 1 > n:
            raise ValueError("horizon exceeds the configuration")
        ext = np.concatenate([config[n - horizon:], config, config[:horizon]])
    else:
        ext = config
    return np.vstack([np.zeros((1, config.shape[1])), np.cumsum(ext, axis=0)])


def flat_vertices(config, epsilon: float, side: str = "two_sided", horizon: int = 100,
                  mean=None, m: MetricSpec | None = None, periodic: bool = True,
                  return_worst: bool = False, full_worst: bool = False):
    """Boolean mask of vertices that are epsilon-flat up to ``horizon``.

    Right: every average over ``v..v+n``, ``n <= horizon``, lies in the closed
    rho-ball of radius ``epsilon`` around ``mean``. Left mirrors it. Two-sided
    covers all windows ``v-a..v+b`` with ``a, b <= horizon``. Without
    ``periodic`` only vertices with a full horizon on the needed sides are
    assessed; the rest are reported as not flat.

    Vertices are dropped as soon as one window leaves the ball, so the
    returned worst distance is exact for flat vertices and a lower bound
    (already above ``epsilon``) for the others unless ``full_worst``.
    """
    if side not in ("left", "right", "two_sided"):
        raise ValueError(f"unknown side {side!r}")
    m = m or euclidean()
    X = np.asarray(config, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    mean = np.zeros(k) + (X.mean(axis=0) if mean is None else np.asarray(mean, dtype=np.float64))
    H = int(horizon)
    S = _window_sums(X, H, periodic)
    off = H if periodic else 0
    if periodic:
        verts = np.arange(n)
    else:
        lo = H if side in ("left", "two_sided") else 0
        hi = n - H if side in ("right", "two_sided") else n
        verts = np.arange(lo, max(lo, hi))
        if len(verts) == 0:
            raise ValueError("horizon exceeds the configuration")
    a_range = np.arange(H + 1) if side in ("left", "two_sided") else np.zeros(1, dtype=int)
    b_range = np.arange(H + 1) if side in ("right", "two_sided") else np.zeros(1, dtype=int)
    worst = np.zeros(len(verts))
    alive = np.arange(len(verts))
    for a in a_range:
        if len(alive) == 0:
            break
        # windows v-a .. v+b for every b, only for vertices not yet refuted
        vs = verts[alive]
        starts = vs + off - a
        ends = vs[:, None] + off + b_range[None, :] + 1
        avg = (S[ends] - S[starts][:, None, :]) / (a + b_range + 1)[None, :, None]
        flat = avg.reshape(-1, k)
        dist = pairwise(m, flat, np.broadcast_to(mean, flat.shape)).reshape(len(vs), -1)
        worst[alive] = np.maximum(worst[alive], dist.max(axis=1))
        if not full_worst:
            alive = alive[worst[alive] <= epsilon]
    mask = np.zeros(n, dtype=bool)
    mask[verts] = worst <= epsilon
    if return_worst:
        full = np.full(n, np.inf)
        full[verts] = worst
        return mask, full
    return mask


def epsilon_flat(config, v: int, epsilon: float, side: str = "two_sided", horizon: int = 100,
                 mean=None, m: MetricSpec | None = None, periodic: bool = False) -> FlatnessReport:
    """Flatness of a single vertex up to a finite horizon.

    Raises
    ------
    ValueError
        If the windows do not fit in the configuration (non-periodic) or
        ``2 * horizon + 1`` exceeds its length (periodic).
    """
    X = np.asarray(config, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    H = int(horizon)
    if not periodic:
        need_l = H if side in ("left", "two_sided") else 0
        need_r = H if side in ("right", "two_sided") else 0
        if v - need_l < 0 or v + need_r >= n:
            raise ValueError("horizon exceeds the configuration")
        lo, hi = v - need_l, v + need_r + 1
        mask, worst = flat_vertices(X[lo:hi], epsilon, side, H, mean, m, periodic=False,
                                    return_worst=True, full_worst=True)
        i = v - lo
    else:
        mask, worst = flat_vertices(X, epsilon, side, H, mean, m, periodic=True,
                                    return_worst=True, full_worst=True)
        i = v
    return FlatnessReport(int(v), float(epsilon), side, H, bool(mask[i]), float(worst[i]))
