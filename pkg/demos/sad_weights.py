"""Weights of initial opinions inside a quiet window.

Runs a short simulation with a recorded event log, picks the widest window
between two edges that never updated, and checks that every final opinion
in it is the weighted average of initial opinions given by the SAD rows.
"""
import numpy as np

from deffuant_lab import distributions as dist
from deffuant_lab.dynamics import Lattice, SimParams, run_simulation
from deffuant_lab.sad import check_unimodality, find_quiet_window, track_weights, verify_representation

p = SimParams(Lattice(400), theta=0.3, t_max=30.0, distribution=dist.uniform_box([0], [1]),
              seed=3, record_events=True)
s = run_simulation(p)
window = find_quiet_window(s.event_log, p.lattice)
table = track_weights(s.event_log, window, p.mu, p.lattice)
err = verify_representation(table, s.initial_opinions, s.final_opinions)

print(f"window between quiet edges {window}: {len(table.vertices)} vertices")
print(f"max |weighted average - final opinion| = {err:.2e}")
print(f"rows unimodal: {all(check_unimodality(r, 1e-12) for r in table.weights)}")
mid = table.vertices[len(table.vertices) // 2]
row = table.row(mid)
nz = np.flatnonzero(row > 1e-3)
print(f"vertex {mid}: weight > 1e-3 on vertices {table.vertices[nz].tolist()}")
