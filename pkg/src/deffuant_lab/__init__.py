"""Deffuant bounded-confidence dynamics on line lattices with vector opinions.

Submodules
----------
metrics        distance measures and randomized property checkers
distributions  initial-opinion catalog with closed-form mean and radius
dynamics       event-driven simulation, monitors and outcome labels
sad            Sharing-a-Drink profiles and weight tracking
geometry       reachable set D_theta, merge timeline, gap h, predicted theta_c
sweep          theta sweeps with Wilson intervals
scenarios      named end-to-end pipelines
"""
from .metrics import MetricSpec, metric_distance
from .distributions import DistributionSpec, distribution_mean, distribution_radius, sample_initial
from .dynamics import Lattice, SimParams, run_simulation, classify_outcome

__version__ = "0.1.0"

__all__ = ["MetricSpec", "metric_distance", "DistributionSpec", "distribution_mean",
           "distribution_radius", "sample_initial", "Lattice", "SimParams", "run_simulation",
           "classify_outcome"]
