import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deffuant_lab import metrics as met
from deffuant_lab.metrics import metric_distance, pairwise


def test_euclidean_unit_separation():
    assert metric_distance(met.euclidean(), (0, 0), (1, 0)) == 1.0


def test_cubic_between_one_and_two():
    assert metric_distance(met.cubic(), 1.0, 2.0) == 7.0


def test_lp_pow_direct_formula():
    m = met.lp_pow(2)
    assert metric_distance(m, [0.0], [0.5]) == pytest.approx(0.25, abs=1e-15)
    x, y = np.array([0.1, -0.4, 2.0]), np.array([1.0, 0.3, -0.5])
    for p in (0.5, 1.5, 2.0, 3.0):
        assert metric_distance(met.lp_pow(p), x, y) == pytest.approx(np.sum(np.abs(x - y) ** p),
                                                                       rel=1e-13)


def test_discrete_indicator():
    assert metric_distance(met.discrete(), 0.3, 0.3) == 0.0
    assert metric_distance(met.discrete(), 0.3, 0.300001) == 1.0


def test_bounded_euclid_caps():
    m = met.bounded_euclid(1.0)
    assert metric_distance(m, 0.0, 0.4) == pytest.approx(0.4)
    assert metric_distance(m, 0.0, 40.0) == 1.0


def test_dimension_mismatch_rejected():
    with pytest.raises(met.MetricError):
        metric_distance(met.euclidean(), (0, 0), (0, 0, 0))


def test_phi_component_validation():
    with pytest.raises(met.MetricError):
        met.PhiComponent("power", 1.0, 0.5)
    with pytest.raises(met.MetricError):
        met.phi([])


def test_declared_flags():
    assert met.cubic().declared_locally_dominated
    assert met.lp_pow(2).declared_locally_dominated
    assert not met.lp_pow(0.5).declared_locally_dominated
    assert not met.discrete().declared_locally_dominated


def test_round_trip_dict():
    for m in (met.euclidean(), met.lp(3), met.lp(math.inf), met.lp_pow(0.5), met.discrete(),
              met.bounded_euclid(2.0), met.cubic(),
              met.phi([met.PhiComponent("power", 1.0, 2.0), met.PhiComponent("expm1", 2.0, 0.5)])):
        assert met.MetricSpec.from_dict(m.to_dict()) == m


def test_pairwise_matches_scalar(rng):
    X, Y = rng.normal(size=(50, 3)), rng.normal(size=(50, 3))
    for m in (met.euclidean(), met.lp(1), met.lp(math.inf), met.lp_pow(0.7), met.bounded_euclid(1.0)):
        fast = pairwise(m, X, Y)
        slow = [metric_distance(m, x, y) for x, y in zip(X, Y)]
        np.testing.assert_allclose(fast, slow, rtol=1e-14)


# --- property checkers -----------------------------------------------------

def test_weak_convexity_verdicts():
    assert met.check_weak_convexity(met.lp(1), (-1, 1), 100_000, 0, k=2).holds
    v = met.check_weak_convexity(met.lp_pow(0.5), (-1, 1), 100_000, 0, k=2)
    assert not v.holds and v.label == "counterexample" and v.witness is not None
    assert met.check_weak_convexity(met.discrete(), (-1, 1), 20_000, 0, k=2).holds


def test_local_domination_verdicts():
    v = met.check_local_domination(met.lp(math.inf), 1.0, (-1, 1), k=3)
    assert v.holds and v.estimate <= 1 + 1e-9
    assert not met.check_local_domination(met.discrete(), 1.0, (-1, 1), k=2).holds
    v = met.check_local_domination(met.cubic(), 1.0, (-10, 10), k=1)
    assert v.holds and math.isfinite(v.estimate)


def test_sensitivity_verdicts():
    assert met.check_coordinate_sensitivity(met.lp(2), 1, [1, 10, 100], k=2).holds
    assert met.check_coordinate_sensitivity(met.lp(1), 2, [1, 10, 100], k=2).holds
    assert not met.check_coordinate_sensitivity(met.bounded_euclid(1.0), 1, [1, 10, 100], k=2).holds
    assert not met.check_coordinate_sensitivity(met.discrete(), 1, [1, 10, 100], k=2).holds


def test_axioms():
    assert met.check_metric_axioms(met.lp(3), (-1, 1), 20_000, 0, k=3).holds
    # rho_p with p > 1 breaks the triangle inequality
    assert not met.check_metric_axioms(met.lp_pow(2), (-1, 1), 20_000, 0, k=1).holds


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.sampled_from([1.0, 1.5, 2.0, 4.0, math.inf]))
def test_lp_symmetric_nonnegative(x, y, p):
    m = met.lp(p)
    d = metric_distance(m, x, y)
    assert d >= 0
    assert d == metric_distance(m, y, x)
    assert metric_distance(m, x, x) == 0
