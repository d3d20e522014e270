"""Small theta sweep for uniform [0, 1] opinions on a cycle.

Desk-sized (n=200, 20 trials) so it finishes in well under a minute; the
acceptance suite runs the full-size version.
"""
import sys

from deffuant_lab import distributions as dist
from deffuant_lab.dynamics import Lattice, SimParams
from deffuant_lab.geometry import predict
from deffuant_lab.sweep import SweepSpec, run_sweep, theta_range

d = dist.uniform_box([0.0], [1.0])
base = SimParams(Lattice(200), theta=1.0, t_max=1000.0, distribution=d)
spec = SweepSpec(base, theta_range(0.3, 0.7, 0.05), trials=20, master_seed=7)
res = run_sweep(spec, jobs=int(sys.argv[1]) if len(sys.argv) > 1 else 1,
                theta_c_predicted=predict(d).theta_c)

for t, e, lo, hi in zip(res.thetas, res.estimates, res.wilson_lo, res.wilson_hi):
    bar = "#" * int(round(40 * e))
    print(f"theta={t:4.2f}  {e:4.2f}  [{lo:4.2f}, {hi:4.2f}]  {bar}")
print(f"crossing of 1/2: {res.theta_c_hat}; predicted: {res.theta_c_predicted}")
