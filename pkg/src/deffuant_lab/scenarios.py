"""Named end-to-end pipelines: geometry, sweeps and single-run statistics.

Each scenario writes ``summary.json``, any CSV tables it produces and a short
``provenance.md`` stating which example it reproduces and what to expect.
Overrides are plain keyword values (``n``, ``t_max``, ``trials``, ``seed``,
``jobs``, ``m`` ...) and default to the desk-scale settings below.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import distributions as dist
from . import metrics as met
from .dynamics import Lattice, SimParams, run_simulation, trial_seed
from .geometry import components_at, interval_components, merge_timeline, predict
from .sweep import SweepSpec, run_sweep, theta_range


class UnknownScenario(KeyError):
    pass


def _out(out_dir) -> Path:
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(out: Path, summary: dict, provenance: str) -> dict:
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_jsonable))
    (out / "provenance.md").write_text(provenance.strip() + "\n")
    return summary


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _timeline_csv(tl, path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(tl.csv_rows())


def _sweep(out, d, m, grid, ov, predicted):
    base = SimParams(Lattice(int(ov.get("n", 500))), theta=1.0, mu=float(ov.get("mu", 0.5)),
                     t_max=float(ov.get("t_max", 2000)), metric=m, distribution=d)
    spec = SweepSpec(base, grid, trials=int(ov.get("trials", 50)),
                     master_seed=int(ov.get("seed", 0)))
    res = run_sweep(spec, jobs=int(ov.get("jobs", 1)), theta_c_predicted=predicted)
    res.write(out)
    return res


def sphere(out_dir, **ov) -> dict:
    out = _out(out_dir)
    m_pts = int(ov.get("m", 10_000))
    p1 = predict(dist.uniform_sphere(1))
    p2 = predict(dist.uniform_sphere(2), discretization_m=m_pts)
    summary = {"k1": p1.to_dict(), "k2": p2.to_dict()}
    if not ov.get("skip_sweep", False):
        res = _sweep(out, dist.uniform_sphere(2), met.euclidean(),
                     theta_range(0.8, 1.2, 0.05), ov, p2.theta_c)
        summary["sweep_k2"] = res.to_dict()
    return _write(out, summary, """
# sphere
Uniform law on the unit sphere S^(k-1). Radius R = 1 for every k; the gap
is h = 2 for k = 1 (two antipodal atoms) and h = 0 for k >= 2, so the
predicted critical bound is 2 for k = 1 and 1 for k >= 2. The k = 2
support is discretized with m equispaced points; h(m) is the chord 2 sin(pi/m).
The k = 2 sweep covers theta in [0.8, 1.2].
""")


def hypercube(out_dir, **ov) -> dict:
    out = _out(out_dir)
    rows = []
    for k in ov.get("ks", (1, 2, 3, 4, 6)):
        for p in ov.get("ps", (0.3, 0.5, 0.7)):
            pr = predict(dist.bernoulli_product(k, p))
            rows.append({"k": k, "p": p, "R": pr.radius, "h": pr.gap, "theta_c": pr.theta_c})
    with open(out / "hypercube.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["k", "p", "R", "h", "theta_c"])
        w.writeheader()
        w.writerows(rows)
    return _write(out, {"table": rows}, """
# hypercube
Independent Bernoulli(p) coordinates: support {0,1}^k, mean p*(1,...,1),
R = sqrt(k) max(p, 1-p) and gap h = 1, so theta_c = max(R, 1); it equals 1
exactly when k = 1 or k in {2,3} with p in [1 - 1/sqrt(k), 1/sqrt(k)].
""")


def figure1(out_dir, **ov) -> dict:
    out = _out(out_dir)
    pts = dist.figure1().support().points
    tl = merge_timeline(pts)
    _timeline_csv(tl, out / "timeline.csv")
    comps = {str(t): components_at(pts, t).to_dict() for t in (1.9, 3.0, 4.0)}
    return _write(out, {"timeline": tl.to_dict(), "components": comps}, """
# figure1
Four atoms (2, +-1, 0) and (-2, 0, +-1). D_theta is the support itself for
theta < 2, the two segments {(2, a, 0)} and {(-2, 0, a)} for theta in [2, 4)
and the whole hull from 4 on: thresholds {2, 4}, counts {4, 2, 1}, h = 4,
while the radius is only sqrt(5).
""")


def chain_reaction(out_dir, **ov) -> dict:
    out = _out(out_dir)
    pts = dist.figure1(0.99).support().points
    tl = merge_timeline(pts)
    _timeline_csv(tl, out / "timeline.csv")
    c2 = components_at(pts, 2.0)
    return _write(out, {"timeline": tl.to_dict(), "components_at_2": c2.to_dict()}, """
# chain_reaction
The four-point set with first coordinate +-0.99 instead of +-2. At theta = 2
the pairs (0.99, +-1, 0) and (-0.99, 0, +-1) link; the resulting segments are
only 1.98 apart, so the same closure merges everything: h = 2.
""")


def ln2(out_dir, **ov) -> dict:
    out = _out(out_dir)
    n_atoms = int(ov.get("n_atoms", 40))
    d = dist.ln2_truncated(n_atoms)
    pr = predict(d)
    x = d.support().points[:, 0]
    comps = interval_components(x, 0.4)
    tl = merge_timeline(d.support().points)
    _timeline_csv(tl, out / "timeline.csv")
    return _write(out, {"prediction": pr.to_dict(), "components_at_0.4": comps,
                        "ln2": math.log(2)}, f"""
# ln2
Atoms 1/n with mass 2^-n, truncated after {n_atoms} atoms (the dropped tail
mass sits on 0). The mean is ln 2, the radius ln 2 and the largest gap 1/2,
so theta_c = R = ln 2 although the gap between 1/2 and 1 is open at
theta = 0.4: D_0.4 = [0, 1/2] u {{1}}.
""")


def mu_critical(out_dir, **ov) -> dict:
    out = _out(out_dir)
    d = dist.mu_example()
    pr = predict(d)
    n = int(ov.get("n", 300))
    trials = int(ov.get("trials", 20))
    t_max = float(ov.get("t_max", 1000))
    report = {}
    for label, mu in (("1/2", 0.5), ("1/pi", 1 / math.pi)):
        bf = []
        for j in range(trials):
            s = run_simulation(SimParams(Lattice(n), theta=1.0, mu=mu, t_max=t_max,
                                         distribution=d,
                                         seed=trial_seed(int(ov.get("seed", 0)), j)))
            bf.append(s.blocked_edge_fraction)
        report[label] = {"mu": mu, "mean_blocked_fraction": float(np.mean(bf)),
                         "trials_with_blocked_edges": int(np.sum(np.array(bf) > 0))}
    return _write(out, {"prediction": pr.to_dict(), "theta": 1.0, "by_mu": report}, """
# mu_critical
Three equally likely atoms (0,0), (1,0), (1/pi,1) at theta = 1 = h > R.
Exactly at this jump, whether the values can collectively reach the mean
depends on mu; the scenario runs mu = 1/2 and mu = 1/pi and reports the
blocked-pair fraction for each. No pass/fail: behaviour exactly at a
threshold is not decidable numerically.
""")


def discrete_anomaly(out_dir, **ov) -> dict:
    out = _out(out_dir)
    d = dist.mixed_1d(0.0, 0.5, -1.0, 1.0)
    n = int(ov.get("n", 400))
    trials = int(ov.get("trials", 50))
    t_max = float(ov.get("t_max", 500))
    unequal, maxd = [], []
    for j in range(trials):
        s = run_simulation(SimParams(Lattice(n), theta=2.0, mu=1 / math.pi, t_max=t_max,
                                     metric=met.discrete(), distribution=d,
                                     seed=trial_seed(int(ov.get("seed", 0)), j)))
        unequal.append(s.unequal_neighbor_fraction)
        maxd.append(s.max_neighbor_euclid)
    summary = {"mean_unequal_neighbor_fraction": float(np.mean(unequal)),
               "mean_max_euclidean_neighbor_distance": float(np.mean(maxd)),
               "trials": trials, "n": n, "t_max": t_max}
    return _write(out, summary, """
# discrete_anomaly
Discrete metric (distance 1 between any two distinct opinions) with
theta = 2: every pair always interacts, yet with mu = 1/pi and a law mixing
an atom at 0 (mass 1/2) with uniform density on [-1, 1] neighbours stay
distinct forever while drifting arbitrarily close in Euclidean terms.
Reports the fraction of neighbour pairs with |difference| > 1e-12 and the
largest Euclidean neighbour distance at t_max.
""")


def cubic(out_dir, **ov) -> dict:
    out = _out(out_dir)
    m = met.cubic()
    a = predict(dist.finite_atoms([[-0.5], [0.5]]), m)
    b = predict(dist.finite_atoms([[1.0], [2.0]]), m)
    summary = {"atoms_-1/2_1/2": a.to_dict(), "atoms_1_2": b.to_dict()}
    if not ov.get("skip_sweep", False):
        sw_ov = {"n": 100, "t_max": 200, "trials": 10, **ov}
        res = _sweep(out, dist.finite_atoms([[-0.5], [0.5]]), m, (0.2, 0.24, 0.26, 0.3),
                     sw_ov, a.theta_c)
        summary["sweep_-1/2_1/2"] = res.to_dict()
    return _write(out, summary, """
# cubic
rho(x, y) = |x^3 - y^3| on the line. Atoms {-1/2, 1/2}: R = 1/8, theta_c =
rho(-1/2, 1/2) = 1/4. Atoms {1, 2}: R = 37/8, theta_c = rho(1, 2) = 7. The
same Euclidean spacing gives different critical bounds, because rho is not
translation invariant.
""")


SCENARIOS = {
    "sphere": sphere,
    "hypercube": hypercube,
    "figure1": figure1,
    "chain_reaction": chain_reaction,
    "ln2": ln2,
    "mu_critical": mu_critical,
    "discrete_anomaly": discrete_anomaly,
    "cubic": cubic,
}


def scenario(name: str, out_dir, **overrides) -> dict:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return fn(out_dir, **overrides)
