"""Event-driven Deffuant dynamics on a finite line or cycle.

Every edge carries a unit-rate Poisson clock. The superposition is generated
as one global clock of rate ``|E|`` whose events pick an edge uniformly,
which has the same law as independent per-edge clocks. When an event hits
edge ``<u, v>`` with opinions ``a, b`` and ``rho(a, b) <= theta`` both move a
fraction ``mu`` of the way towards each other::

    a' = a + mu * (b - a)
    b' = b + mu * (a - b)

otherwise nothing changes.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator

import math

import numpy as np

from . import _kernel
from ._reals import format_real
from .distributions import DistributionSpec, sample_initial
from .metrics import MetricSpec, euclidean, metric_distance

# events drawn per block by the global clock
BLOCK_SIZE = 1 << 18

DEFAULT_CONSENSUS_TOL = 1e-3


@dataclass(frozen=True)
class Lattice:
    """Vertices ``0..n-1`` joined by ``<v, v+1>``; a cycle adds ``<n-1, 0>``."""

    n: int
    boundary: str = "cycle"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("lattice needs at least two vertices")
        if self.boundary not in ("cycle", "path"):
            raise ValueError(f"boundary must be 'cycle' or 'path', not {self.boundary!r}")
        if self.boundary == "cycle" and self.n == 2:
            # a 2-cycle would double the single edge
            object.__setattr__(self, "boundary", "path")

    @property
    def n_edges(self) -> int:
        return self.n if self.boundary == "cycle" else self.n - 1

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.arange(self.n_edges, dtype=np.int64)
        return u, (u + 1) % self.n

    def edge(self, index: int) -> tuple[int, int]:
        return int(index), int((index + 1) % self.n)

    def edge_index(self, u: int, v: int) -> int:
        if (u + 1) % self.n == v and u < self.n_edges:
            return u
        if (v + 1) % self.n == u and v < self.n_edges:
            return v
        raise ValueError(f"<{u}, {v}> is not an edge")


@dataclass(frozen=True)
class SimParams:
    lattice: Lattice
    theta: float
    mu: float = 0.5
    t_max: float = 100.0
    metric: MetricSpec = field(default_factory=euclidean)
    distribution: DistributionSpec | None = None
    seed: int = 0
    record_events: bool = False

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("confidence bound theta must be positive")
        if not 0 < self.mu <= 0.5:
            raise ValueError("mu must lie in (0, 1/2]")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")


@dataclass(frozen=True)
class EventRecord:
    time: float
    edge: tuple[int, int]
    effective: bool


@dataclass
class EventLog:
    """Columnar event log: one row per Poisson event in time order."""

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    effective: np.ndarray

    def __len__(self):
        return len(self.times)

    def __iter__(self) -> Iterator[EventRecord]:
        for t, a, b, e in zip(self.times, self.u, self.v, self.effective):
            yield EventRecord(float(t), (int(a), int(b)), bool(e))

    @classmethod
    def from_records(cls, records) -> "EventLog":
        records = list(records)
        return cls(np.array([r.time for r in records], dtype=np.float64),
                   np.array([r.edge[0] for r in records], dtype=np.int64),
                   np.array([r.edge[1] for r in records], dtype=np.int64),
                   np.array([r.effective for r in records], dtype=bool))

    def effective_only(self) -> "EventLog":
        m = self.effective
        return EventLog(self.times[m], self.u[m], self.v[m], self.effective[m])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "u", "v", "effective"])
            for t, a, b, e in zip(self.times, self.u, self.v, self.effective):
                w.writerow([format_real(float(t)), int(a), int(b), int(e)])

    @classmethod
    def from_csv(cls, path) -> "EventLog":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["time"]) for r in rows]),
                   np.array([int(r["u"]) for r in rows], dtype=np.int64),
                   np.array([int(r["v"]) for r in rows], dtype=np.int64),
                   np.array([r["effective"] == "1" for r in rows], dtype=bool))


@dataclass
class SimState:
    """Mutable simulation state: clock, opinions ``(n, k)`` and RNG stream."""

    time: float
    opinions: np.ndarray
    rng: np.random.Generator
    event_count: int = 0

    @classmethod
    def initial(cls, params: SimParams, opinions=None) -> "SimState":
        init_seq, event_seq = np.random.SeedSequence(params.seed).spawn(2)
        if opinions is None:
            opinions = sample_initial(params.distribution, params.lattice.n,
                                      np.random.default_rng(init_seq))
        ops = np.array(opinions, dtype=np.float64)
        if ops.ndim == 1:
            ops = ops[:, None]
        if len(ops) != params.lattice.n:
            raise ValueError("initial configuration size does not match the lattice")
        return cls(0.0, ops, np.random.default_rng(event_seq))


@dataclass
class TrajectorySummary:
    """End-of-run statistics of one simulation.

    Distances in ``max_neighbor_distance`` and ``blocked_edge_fraction`` are
    measured with the run's metric; ``max_neighbor_euclid`` and
    ``max_deviation_from_mean`` are Euclidean, the latter relative to the
    average of the initial configuration (the conserved value on a cycle).
    """

    final_opinions: np.ndarray
    initial_opinions: np.ndarray
    max_neighbor_distance: float
    max_neighbor_euclid: float
    max_unblocked_distance: float
    blocked_edge_fraction: float
    unequal_neighbor_fraction: float
    max_deviation_from_mean: float
    total_energy_initial: float
    total_energy_final: float
    opinion_sum_initial: np.ndarray
    opinion_sum_final: np.ndarray
    n_events: int
    n_effective: int
    t_max: float
    event_log: EventLog | None = None
    watch_max: np.ndarray | None = None

    def to_dict(self, include_opinions: bool = True) -> dict:
        d = {
            "max_neighbor_distance": self.max_neighbor_distance,
            "max_neighbor_euclid": self.max_neighbor_euclid,
            "max_unblocked_distance": self.max_unblocked_distance,
            "blocked_edge_fraction": self.blocked_edge_fraction,
            "unequal_neighbor_fraction": self.unequal_neighbor_fraction,
            "max_deviation_from_mean": self.max_deviation_from_mean,
            "total_energy_initial": self.total_energy_initial,
            "total_energy_final": self.total_energy_final,
            "opinion_sum_initial": self.opinion_sum_initial.tolist(),
            "opinion_sum_final": self.opinion_sum_final.tolist(),
            "n_events": self.n_events,
            "n_effective": self.n_effective,
            "t_max": self.t_max,
        }
        if include_opinions:
            d["final_opinions"] = self.final_opinions.tolist()
        d = {k: (format_real(v) if isinstance(v, float) else v) for k, v in d.items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=2)

    def fingerprint(self) -> str:
        """Hash of every numeric field; equal iff two runs are bit-identical."""
        h = hashlib.sha256()
        for arr in (self.final_opinions, self.opinion_sum_final,
                    np.array([self.total_energy_final, self.max_neighbor_distance,
                              self.blocked_edge_fraction, self.n_events, self.n_effective])):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        if self.event_log is not None:
            for arr in (self.event_log.times, self.event_log.u, self.event_log.effective):
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# single-event API
# ---------------------------------------------------------------------------

def schedule_next_event(state: SimState, lattice: Lattice) -> tuple[float, tuple[int, int]]:
    """Draw the next event of the superposed clocks: ``(time, edge)``.

    Uses ``state.rng``; the state itself is not advanced.
    """
    n_edges = lattice.n_edges
    t_next = state.time + state.rng.exponential(1.0 / n_edges)
    return t_next, lattice.edge(int(state.rng.integers(n_edges)))


def apply_update(state: SimState, edge: tuple[int, int], theta: float, mu: float,
                 m: MetricSpec | None = None) -> bool:
    """Apply the bounded-confidence update on ``edge``; True if opinions moved."""
    u, v = edge
    a = state.opinions[u]
    b = state.opinions[v]
    if metric_distance(m or euclidean(), a, b) > theta:
        return False
    a_new = a + mu * (b - a)
    b_new = b + mu * (a - b)
    state.opinions[u] = a_new
    state.opinions[v] = b_new
    return True


def step(state: SimState, params: SimParams) -> EventRecord:
    """Advance ``state`` by one event (reference path, one RNG call per draw)."""
    t, edge = schedule_next_event(state, params.lattice)
    state.time = t
    state.event_count += 1
    eff = apply_update(state, edge, params.theta, params.mu, params.metric)
    return EventRecord(t, edge, eff)


def total_energy(state) -> float:
    """Sum over vertices of ``<eta(v), eta(v)>``."""
    ops = state.opinions if isinstance(state, SimState) else np.asarray(state, dtype=np.float64)
    return float(np.einsum("ij,ij->", np.atleast_2d(ops), np.atleast_2d(ops)))


def opinion_sum(state) -> np.ndarray:
    ops = state.opinions if isinstance(state, SimState) else np.asarray(state, dtype=np.float64)
    return np.atleast_2d(ops).sum(axis=0)


# ---------------------------------------------------------------------------
# bulk simulation
# ---------------------------------------------------------------------------

def edge_distances(opinions: np.ndarray, lattice: Lattice, m: MetricSpec) -> np.ndarray:
    eu, ev = lattice.edge_arrays()
    return _kernel.neighbor_distances(np.ascontiguousarray(opinions), eu, ev, *m.kernel_params())


def run_simulation(params: SimParams, initial=None, watch=None, watch_center=None) -> TrajectorySummary:
    """Replay Poisson events up to ``t_max`` and summarize the final state.

    Parameters
    ----------
    params : SimParams
    initial : array_like, optional
        Initial configuration ``(n, k)``; drawn from ``params.distribution``
        with the run seed when omitted.
    watch : array_like of int, optional
        Vertices whose largest Euclidean distance from ``watch_center``
        (default: distribution mean) is tracked over the whole run and
        reported in ``summary.watch_max``.
    """
    state = SimState.initial(params, initial)
    lattice = params.lattice
    init = state.opinions.copy()
    ops = state.opinions
    eu, ev = lattice.edge_arrays()
    kp = params.metric.kernel_params()
    n_edges = lattice.n_edges

    watch_slot = np.full(lattice.n, -1, dtype=np.int64)
    if watch is not None and len(watch):
        watch = np.asarray(watch, dtype=np.int64)
        watch_slot[watch] = np.arange(len(watch))
        if watch_center is None:
            watch_center = params.distribution.mean()
        watch_center = np.asarray(watch_center, dtype=np.float64)
        watch_max = np.linalg.norm(ops[watch] - watch_center, axis=1)
    else:
        watch_center = np.zeros(ops.shape[1])
        watch_max = np.zeros(0)

    logs = []
    t = 0.0
    n_events = n_eff = 0
    while True:
        gaps = state.rng.exponential(1.0 / n_edges, BLOCK_SIZE)
        idx = state.rng.integers(0, n_edges, BLOCK_SIZE)
        times = t + np.cumsum(gaps)
        cut = int(np.searchsorted(times, params.t_max, side="right"))
        idx = idx[:cut]
        eff = np.empty(cut, dtype=np.bool_)
        n_eff += _kernel.run_events(ops, eu, ev, idx, params.theta, params.mu, *kp,
                                    eff, watch_slot, watch_center, watch_max)
        n_events += cut
        if params.record_events:
            logs.append((times[:cut], idx, eff))
        if cut < BLOCK_SIZE:
            break
        t = times[-1]
    state.time = params.t_max
    state.event_count = n_events

    log = None
    if params.record_events:
        ts = np.concatenate([x[0] for x in logs])
        ix = np.concatenate([x[1] for x in logs])
        log = EventLog(ts, eu[ix], ev[ix], np.concatenate([x[2] for x in logs]))
    return summarize(init, ops, params, n_events, n_eff, log,
                     watch_max if len(watch_max) else None)


def summarize(init, final, params: SimParams, n_events=0, n_eff=0, log=None,
              watch_max=None) -> TrajectorySummary:
    lattice = params.lattice
    final = np.atleast_2d(np.asarray(final, dtype=np.float64))
    if final.shape[0] != lattice.n:
        final = final.T
    init = np.asarray(init, dtype=np.float64).reshape(final.shape)
    eu, ev = lattice.edge_arrays()
    dist = edge_distances(final, lattice, params.metric)
    diff = final[eu] - final[ev]
    euclid = np.linalg.norm(diff, axis=1)
    blocked = dist > params.theta
    center = init.mean(axis=0)
    return TrajectorySummary(
        final_opinions=final.copy(),
        initial_opinions=init,
        max_neighbor_distance=float(dist.max()),
        max_neighbor_euclid=float(euclid.max()),
        max_unblocked_distance=float(dist[~blocked].max()) if (~blocked).any() else 0.0,
        blocked_edge_fraction=float(blocked.mean()),
        unequal_neighbor_fraction=float((np.abs(diff).max(axis=1) > 1e-12).mean()),
        max_deviation_from_mean=float(np.linalg.norm(final - center, axis=1).max()),
        total_energy_initial=total_energy(init),
        total_energy_final=total_energy(final),
        opinion_sum_initial=opinion_sum(init),
        opinion_sum_final=opinion_sum(final),
        n_events=int(n_events),
        n_effective=int(n_eff),
        t_max=params.t_max,
        event_log=log,
        watch_max=watch_max,
    )


def replay(initial, log: EventLog, theta: float, mu: float, m: MetricSpec | None = None,
           check_flags: bool = True) -> np.ndarray:
    """Re-apply a recorded event log event by event with :func:`apply_update`."""
    ops = np.array(initial, dtype=np.float64)
    if ops.ndim == 1:
        ops = ops[:, None]
    state = SimState(0.0, ops, np.random.default_rng(0))
    for rec in log:
        did = apply_update(state, rec.edge, theta, mu, m)
        if check_flags and did != rec.effective:
            raise AssertionError(f"event at t={rec.time} replayed as effective={did}")
    return state.opinions


def classify_outcome(summary: TrajectorySummary, theta: float,
                     consensus_tol: float = DEFAULT_CONSENSUS_TOL) -> str:
    """Finite-horizon label: ``consensus_proxy``, ``fragmented_proxy`` or ``undecided``."""
    if not consensus_tol > 0:
        raise ValueError("consensus_tol must be positive")
    if (summary.max_neighbor_distance < consensus_tol
            and summary.max_deviation_from_mean < consensus_tol):
        return "consensus_proxy"
    if summary.blocked_edge_fraction > 0 and summary.max_unblocked_distance < consensus_tol:
        return "fragmented_proxy"
    return "undecided"


def trial_seed(master_seed: int, trial: int) -> int:
    """Independent 64-bit seed for ``trial`` derived from the master seed."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


def pair_energy_drop(a, b, a_new, b_new) -> float:
    """``|a|^2 + |b|^2 - |a'|^2 - |b'|^2`` evaluated without cancellation.

    The direct difference of squared norms loses all relative accuracy when
    the drop is tiny next to ``|a|^2``. Writing ``da = a - a'`` and
    ``e = (b' - b) - da`` (zero for an exact update) the drop equals
    ``sum da * ((a - b) + (a' - b')) - e * (b + b')``; both differences of
    nearby values are formed first, so the only remaining error is the one
    already present in the rounded states.
    """
    a, b, a_new, b_new = (np.asarray(x, dtype=np.float64) for x in (a, b, a_new, b_new))
    da = a - a_new
    e = (b_new - b) - da
    s = (a - b) + (a_new - b_new)
    return math.fsum(np.concatenate([da * s, -e * (b + b_new)]).tolist())
