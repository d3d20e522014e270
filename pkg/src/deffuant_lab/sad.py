"""Sharing a Drink (SAD) profiles and weight tracking.

A unit mass starts at one site of the integers. Each step picks an edge
``<u, u+1>`` and mixes the two entries::

    xi(u)   <- (1 - mu) xi(u) + mu xi(u+1)
    xi(u+1) <- mu xi(u) + (1 - mu) xi(u+1)

Running the dynamics' effective updates in reverse order from a vertex ``v``
produces the weights with which ``eta_t(v)`` averages the initial opinions,
so every row of a :class:`WeightTable` is itself a SAD profile.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dynamics import EventLog, Lattice

UNIMODAL_TOL = 1e-14


class ContractViolation(RuntimeError):
    """An effective update crossed an edge declared quiet."""


@dataclass(frozen=True)
class SADProfile:
    """Weights on the window ``offset, offset+1, ...`` of the integers."""

    offset: int
    weights: np.ndarray

    @classmethod
    def delta(cls, origin: int = 0) -> "SADProfile":
        return cls(int(origin), np.ones(1))

    def __getitem__(self, v: int) -> float:
        i = v - self.offset
        return float(self.weights[i]) if 0 <= i < len(self.weights) else 0.0

    def total(self) -> float:
        return float(np.sum(self.weights))

    def as_dict(self) -> dict[int, float]:
        return {self.offset + i: float(w) for i, w in enumerate(self.weights) if w != 0}

    def trimmed(self) -> "SADProfile":
        nz = np.flatnonzero(self.weights)
        if len(nz) == 0:
            return self
        return SADProfile(self.offset + int(nz[0]), self.weights[nz[0]:nz[-1] + 1].copy())

    def is_valid(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.weights >= 0) and abs(self.total() - 1.0) <= tol)


def _edge_left(edge) -> int:
    if np.isscalar(edge):
        return int(edge)
    u, v = int(edge[0]), int(edge[1])
    if abs(u - v) != 1:
        raise ValueError(f"<{u}, {v}> is not an edge of the integer line")
    return min(u, v)


def sad_step(profile: SADProfile, edge, mu: float) -> SADProfile:
    """One SAD move on ``<u, u+1>``; only the two entries at u and u+1 change."""
    if not 0 < mu <= 0.5:
        raise ValueError("mu must lie in (0, 1/2]")
    u = _edge_left(edge)
    lo = min(profile.offset, u)
    hi = max(profile.offset + len(profile.weights), u + 2)
    w = np.zeros(hi - lo)
    w[profile.offset - lo:profile.offset - lo + len(profile.weights)] = profile.weights
    i = u - lo
    a, b = w[i], w[i + 1]
    # same arithmetic as the opinion update, so mass moves symmetrically
    w[i] = a + mu * (b - a)
    w[i + 1] = b + mu * (a - b)
    return SADProfile(lo, w)


def sad_run(edge_sequence, mu: float, origin: int = 0) -> SADProfile:
    """Fold :func:`sad_step` over ``edge_sequence`` from the delta at ``origin``."""
    prof = SADProfile.delta(origin)
    for e in edge_sequence:
        prof = sad_step(prof, e, mu)
    return prof.trimmed()


def check_unimodality(profile, tol: float = UNIMODAL_TOL) -> bool:
    """True iff the weights rise (weakly) to a mode and then fall (weakly).

    Comparisons allow ``tol`` of slack so round-off plateaus count as ties.
    Accepts a :class:`SADProfile` or a plain sequence of weights.
    """
    w = np.asarray(profile.weights if isinstance(profile, SADProfile) else profile, dtype=float)
    n = len(w)
    i = 0
    while i + 1 < n and w[i + 1] >= w[i] - tol:
        i += 1
    while i + 1 < n and w[i + 1] <= w[i] + tol:
        i += 1
    return i >= n - 1


# ---------------------------------------------------------------------------
# weight tables for simulated runs
# ---------------------------------------------------------------------------

@dataclass
class WeightTable:
    """Rows ``xi_{v,t}(y)`` for the window vertices.

    ``weights[i, j]`` is the weight of initial vertex ``vertices[j]`` in the
    opinion of ``vertices[i]`` at the end of the log.
    """

    vertices: np.ndarray
    weights: np.ndarray

    def row(self, v: int) -> np.ndarray:
        i = int(np.flatnonzero(self.vertices == v)[0])
        return self.weights[i]

    def row_profile(self, v: int) -> SADProfile:
        """Row of ``v`` as a profile on window positions (re-centred at 0)."""
        i = int(np.flatnonzero(self.vertices == v)[0])
        return SADProfile(0, self.weights[i].copy()).trimmed()

    def row_sums(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def to_csv(self, path, drop_zeros: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["v", "y", "weight"])
            for i, v in enumerate(self.vertices):
                for j, y in enumerate(self.vertices):
                    x = self.weights[i, j]
                    if x != 0 or not drop_zeros:
                        w.writerow([int(v), int(y), repr(float(x))])


def quiet_edges(log: EventLog, lattice: Lattice) -> np.ndarray:
    """Indices of edges that never carried an effective update in ``log``."""
    busy = np.zeros(lattice.n_edges, dtype=bool)
    eff = log.effective
    u, v = log.u[eff], log.v[eff]
    # edge index is the vertex whose successor is the other endpoint
    left = np.where((u + 1) % lattice.n == v, u, v)
    busy[left] = True
    return np.flatnonzero(~busy)


def find_quiet_window(log: EventLog, lattice: Lattice, vertex: int | None = None):
    """Pair of quiet edges enclosing ``vertex`` (or the widest window).

    Returns ``(left_edge, right_edge)`` as edge indices, or ``None`` when the
    window cannot be closed: no quiet edge at all, or a path with a single
    quiet edge. ``None`` tells the caller to use the whole lattice.
    """
    q = quiet_edges(log, lattice)
    n = lattice.n
    if lattice.boundary == "path":
        # the two ends act as quiet edges
        q = np.concatenate(([-1], q, [n - 1]))
    elif len(q) == 0:
        return None
    if len(q) == 1:
        return (int(q[0]), int(q[0]))
    if vertex is None:
        lengths = np.diff(np.concatenate((q, [q[0] + n])))
        if lattice.boundary == "path":
            lengths[-1] = 0
        i = int(np.argmax(lengths))
        return (int(q[i]), int(q[(i + 1) % len(q)]))
    j = int(np.searchsorted(q, vertex))  # first quiet edge at or right of vertex
    if lattice.boundary == "cycle":
        return (int(q[j - 1]), int(q[j % len(q)]))
    return (int(q[j - 1]), int(q[j]))


def window_vertices(window, lattice: Lattice) -> np.ndarray:
    """Vertices strictly between the quiet edges (left, right)."""
    if window is None:
        return np.arange(lattice.n)
    left, right = window
    length = (right - left) % lattice.n
    if length == 0:
        length = lattice.n
    return (left + 1 + np.arange(length)) % lattice.n


def track_weights(event_log: EventLog, window, mu: float, lattice: Lattice | None = None) -> WeightTable:
    """Fold the SAD recursion over the effective events inside ``window``.

    Parameters
    ----------
    event_log : EventLog
    window : tuple of int or None
        ``(left_quiet_edge, right_quiet_edge)`` edge indices, or ``None`` for
        the whole lattice.
    mu : float
    lattice : Lattice, optional
        Needed for cycles and for ``window=None``; inferred otherwise.

    Raises
    ------
    ContractViolation
        If an effective event uses one of the two quiet edges.
    """
    if lattice is None:
        n = int(max(event_log.u.max(initial=0), event_log.v.max(initial=0))) + 1
        if window is not None:
            n = max(n, window[1] + 1)
        lattice = Lattice(max(n, 2), "path")
    verts = window_vertices(window, lattice)
    pos = np.full(lattice.n, -1, dtype=np.int64)
    pos[verts] = np.arange(len(verts))
    quiet = set() if window is None else {window[0] % lattice.n, window[1] % lattice.n}
    W = np.eye(len(verts))
    for rec in event_log:
        if not rec.effective:
            continue
        u, v = rec.edge
        left = u if (u + 1) % lattice.n == v else v
        if left in quiet:
            raise ContractViolation(f"effective update on quiet edge {left} at t={rec.time}")
        i, j = pos[u], pos[v]
        if i < 0 or j < 0:
            continue
        a = W[i].copy()
        b = W[j]
        W[i] = a + mu * (b - a)
        W[j] = b + mu * (a - b)
    return WeightTable(verts, W)


def verify_representation(table: WeightTable, initial, final) -> float:
    """Largest ``|sum_y xi_{v,t}(y) eta_0(y) - eta_t(v)|_2`` over window rows."""
    init = np.asarray(initial, dtype=np.float64)
    fin = np.asarray(final, dtype=np.float64)
    if init.ndim == 1:
        init, fin = init[:, None], fin[:, None]
    pred = table.weights @ init[table.vertices]
    if len(table.vertices) == 0:
        return 0.0
    return float(np.linalg.norm(pred - fin[table.vertices], axis=1).max())
