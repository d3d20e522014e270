"""Reachable-set geometry for a few finite supports.

Prints merge timelines, the gap h, the radius R and the predicted critical
bound max(R, h) for the four-point set, its chain-reaction variant, the
truncated 1/n law and the hypercube corners.
"""
from deffuant_lab import distributions as dist
from deffuant_lab import metrics as met
from deffuant_lab.geometry import components_at, merge_timeline, predict

for name, d in [("four points", dist.figure1()), ("four points, shift 0.99", dist.figure1(0.99)),
                ("1/n atoms (40)", dist.ln2_truncated(40)),
                ("{0,1}^3, p=0.5", dist.bernoulli_product(3, 0.5))]:
    tl = merge_timeline(d.support().points)
    pr = predict(d)
    print(f"{name:26s} thresholds={[round(t, 6) for t in tl.thresholds][-4:]} "
          f"counts={tl.component_counts[-4:]} R={pr.radius:.6f} h={pr.gap:.6f} "
          f"theta_c={pr.theta_c:.6f}")

pts = dist.figure1().support().points
for theta in (1.9, 3.0, 4.0):
    dec = components_at(pts, theta)
    print(f"theta={theta}: {dec.n_components} component(s)")

two = dist.finite_atoms([[1.0], [2.0]])
print("cubic metric, atoms {1, 2}: theta_c =", predict(two, met.cubic()).theta_c)
