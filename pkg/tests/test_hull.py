import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from deffuant_lab import metrics as met
from deffuant_lab.hull import (UnsupportedMetricError, descent_distance, euclid_reach,
                               hull_distance, hull_distance_bounds, lp_distance, wolfe_distance)
from deffuant_lab.metrics import pairwise

FIG1_A = [(2, 1, 0), (2, -1, 0)]
FIG1_B = [(-2, 0, 1), (-2, 0, -1)]


def _grid_oracle(A, B, m, steps=201):
    """Brute force over convex combinations of two segments (or point sets)."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    t = np.linspace(0, 1, steps)
    X = np.outer(1 - t, A[0]) + np.outer(t, A[-1])
    Y = np.outer(1 - t, B[0]) + np.outer(t, B[-1])
    XX = np.repeat(X, steps, axis=0)
    YY = np.tile(Y, (steps, 1))
    return float(pairwise(m, XX, YY).min())


def test_figure1_segments_at_distance_four():
    r = hull_distance_bounds(FIG1_A, FIG1_B, met.euclidean())
    assert abs(r.value - 4) <= 1e-9 and r.certified_error <= 1e-9
    assert abs(_grid_oracle(FIG1_A, FIG1_B, met.euclidean()) - 4) <= 1e-9


def test_chain_variant_segments():
    A = [(0.99, 1, 0), (0.99, -1, 0)]
    B = [(-0.99, 0, 1), (-0.99, 0, -1)]
    assert hull_distance(A, B, met.euclidean()) == pytest.approx(1.98, abs=1e-9)
    assert _grid_oracle(A, B, met.euclidean()) == pytest.approx(1.98, abs=1e-9)


def test_identical_singletons():
    assert hull_distance([(0.3, 0.2)], [(0.3, 0.2)], met.euclidean()) == 0.0


def test_overlapping_hulls_zero():
    A = [(0, 0), (2, 0), (0, 2)]
    B = [(0.5, 0.5), (3, 3)]
    assert hull_distance(A, B, met.euclidean()) <= 1e-12


def test_interval_route():
    assert hull_distance([[0.0], [1.0]], [[3.0], [4.0]], met.euclidean()) == 2.0
    assert hull_distance([[-0.5], [-0.1]], [[0.5]], met.cubic()) == pytest.approx(0.125 + 0.001)


def test_unsupported_metrics():
    with pytest.raises(UnsupportedMetricError):
        hull_distance([[0.0]], [[1.0]], met.discrete())
    with pytest.raises(UnsupportedMetricError):
        hull_distance([[0.0, 0.0]], [[1.0, 0.0]], met.lp_pow(0.5))


@pytest.mark.parametrize("p", [1.0, math.inf])
def test_lp_routes_agree_with_grid(p):
    A = [(1.0, 0.3), (2.0, -1.0)]
    B = [(-1.0, 0.5), (-0.4, 2.0)]
    r = lp_distance(np.array(A), np.array(B), p)
    assert r.certified_error <= 1e-8
    grid = _grid_oracle(A, B, met.lp(p), 801)
    # the grid is an upper bound, off by at most one grid step on each segment
    assert r.value <= grid + 1e-12
    assert grid - r.value <= 2 * 3 / 800


def test_descent_route_agrees_with_grid():
    A = [(1.0, 0.3, 0.2), (2.0, -1.0, 0.0)]
    B = [(-1.0, 0.5, 1.0), (-0.4, 2.0, -1.0)]
    m = met.lp(3)
    r = hull_distance_bounds(A, B, m)
    assert r.certified_error <= 1e-8
    assert r.value == pytest.approx(_grid_oracle(A, B, m, 801), abs=1e-5)


def test_lp_pow_is_power_of_lp():
    A, B = [(1.0, 0.0), (1.0, 1.0)], [(-1.0, 0.0), (-2.0, 3.0)]
    assert hull_distance(A, B, met.lp_pow(3)) == pytest.approx(hull_distance(A, B, met.lp(3)) ** 3,
                                                                 rel=1e-7)


def test_bounded_euclid_caps_hull_distance():
    assert hull_distance([(0.0, 0.0)], [(0.0, 5.0), (1.0, 5.0)], met.bounded_euclid(1.0)) == 1.0


pts = st.integers(1, 5).flatmap(
    lambda n: arrays(np.float64, (n, 3), elements=st.floats(-5, 5, allow_nan=False)))


@settings(max_examples=60, deadline=None)
@given(pts, pts)
def test_wolfe_vs_descent(A, B):
    # two independent routes for the Euclidean hull distance
    w = wolfe_distance(A, B)
    d = descent_distance(A, B, met.lp(2), p=2.0, tol=1e-10, n_starts=8)
    assert w.lower_bound <= w.value + 1e-12
    assert abs(w.value - d.value) <= 1e-6 * max(1.0, w.value)
    # certified intervals must overlap
    assert w.lower_bound <= d.value + 1e-9 and d.lower_bound <= w.value + 1e-9


@settings(max_examples=40, deadline=None)
@given(pts, pts)
def test_l1_linprog_vs_descent_bound(A, B):
    r = lp_distance(A, B, 1.0)
    # the LP optimum can never exceed the distance of any vertex pair
    assert r.value <= pairwise(met.lp(1), np.repeat(A, len(B), 0), np.tile(B, (len(A), 1))).min() + 1e-9
    assert r.lower_bound <= r.value + 1e-12


def test_euclid_reach_is_sound(rng):
    for m in (met.euclidean(), met.lp(1), met.lp(4), met.lp(math.inf), met.lp_pow(2),
              met.phi([met.PhiComponent("power", 1.0, 2.0), met.PhiComponent("expm1", 1.0, 1.0),
                       met.PhiComponent("power", 2.0, 1.0)])):
        X, Y = rng.normal(size=(2000, 3)), rng.normal(size=(2000, 3))
        rho = pairwise(m, X, Y)
        eu = np.linalg.norm(X - Y, axis=1)
        reach = np.array([euclid_reach(m, r, 3) for r in rho])
        assert np.all(eu <= reach * (1 + 1e-12) + 1e-12)
    x, y = rng.normal(size=2000), rng.normal(size=2000)
    rho = np.abs(x**3 - y**3)
    assert np.all(np.abs(x - y) <= np.array([euclid_reach(met.cubic(), r, 1) for r in rho]) + 1e-12)
