import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deffuant_lab import distributions as dist
from deffuant_lab.dynamics import EventLog, Lattice, SimParams, run_simulation, trial_seed
from deffuant_lab.sad import (ContractViolation, SADProfile, WeightTable, check_unimodality,
                              find_quiet_window, quiet_edges, sad_run, sad_step, track_weights,
                              verify_representation, window_vertices)


def test_single_step_halves():
    p = sad_step(SADProfile.delta(0), (0, 1), 0.5)
    assert p.as_dict() == {0: 0.5, 1: 0.5}
    q = sad_step(p, (1, 2), 0.5)
    assert q.as_dict() == {0: 0.5, 1: 0.25, 2: 0.25}


def test_step_on_empty_edge_is_noop():
    p = sad_run([(0, 1)], 0.3)
    q = sad_step(p, (5, 6), 0.3)
    assert q.trimmed().as_dict() == p.as_dict()


def test_edge_forms():
    assert sad_step(SADProfile.delta(), 0, 0.5).as_dict() == sad_step(SADProfile.delta(), (1, 0), 0.5).as_dict()
    with pytest.raises(ValueError):
        sad_step(SADProfile.delta(), (0, 2), 0.5)
    with pytest.raises(ValueError):
        sad_step(SADProfile.delta(), 0, 0.7)


def test_sad_run_examples():
    assert sad_run([], 0.5).as_dict() == {0: 1.0}
    prof = sad_run([(0, 1), (1, 2)], 0.5)
    np.testing.assert_array_equal(prof.weights, [0.5, 0.25, 0.25])


def test_unimodality_examples():
    assert check_unimodality([0.5, 0.25, 0.25])
    assert check_unimodality(SADProfile.delta())
    assert not check_unimodality([0.4, 0.1, 0.5])


def test_random_sequences_stay_valid(rng):
    for _ in range(1000):
        mu = float(rng.uniform(0.01, 0.5))
        seq = rng.integers(-6, 6, size=int(rng.integers(0, 200)))
        prof = sad_run(seq, mu)
        assert prof.is_valid(1e-12)
        assert check_unimodality(prof)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-4, 4), max_size=60), st.floats(0.01, 0.5))
def test_sad_properties(seq, mu):
    prof = sad_run(seq, mu)
    assert np.all(prof.weights >= 0)
    assert abs(prof.total() - 1) <= 1e-12
    assert check_unimodality(prof)


# --- weight tables -------------------------------------------------------------

def _log(events, times=None):
    events = list(events)
    t = np.arange(1, len(events) + 1, dtype=float) if times is None else times
    return EventLog(t, np.array([e[0] for e in events], dtype=np.int64),
                    np.array([e[1] for e in events], dtype=np.int64),
                    np.array([e[2] for e in events], dtype=bool))


def test_empty_log_identity():
    lat = Lattice(6, "path")
    log = _log([])
    tab = track_weights(log, None, 0.5, lat)
    np.testing.assert_array_equal(tab.weights, np.eye(6))
    # every edge is quiet, so any found window is a single vertex
    assert len(track_weights(log, find_quiet_window(log, lat), 0.5, lat).vertices) == 1
    x = np.arange(6.0)
    assert verify_representation(tab, x, x) == 0.0


def test_single_event_rows():
    lat = Lattice(6, "path")
    log = _log([(2, 3, True)])
    tab = track_weights(log, (-1, 5), 0.3, lat)
    np.testing.assert_allclose(tab.row(2)[2:4], [0.7, 0.3])
    np.testing.assert_allclose(tab.row(3)[2:4], [0.3, 0.7])


def test_quiet_edge_contract():
    lat = Lattice(8)
    log = _log([(2, 3, True), (5, 6, False)])
    q = quiet_edges(log, lat)
    assert 2 not in q and 5 in q
    with pytest.raises(ContractViolation):
        track_weights(log, (2, 6), 0.5, lat)


def test_window_geometry():
    lat = Lattice(10)
    np.testing.assert_array_equal(window_vertices((7, 1), lat), [8, 9, 0, 1])
    np.testing.assert_array_equal(window_vertices(None, lat), np.arange(10))
    log = _log([(0, 1, True), (9, 0, True)])
    assert find_quiet_window(log, lat, vertex=0) == (8, 1)


def test_cycle_without_quiet_edge_uses_whole_lattice():
    lat = Lattice(4)
    log = _log([(0, 1, True), (1, 2, True), (2, 3, True), (3, 0, True)])
    assert find_quiet_window(log, lat) is None
    tab = track_weights(log, None, 0.5, lat)
    np.testing.assert_allclose(tab.row_sums(), 1.0)


def test_csv_output(tmp_path):
    tab = WeightTable(np.array([0, 1]), np.array([[0.7, 0.3], [0.3, 0.7]]))
    tab.to_csv(tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "v,y,weight" and len(lines) == 5


def _check_run(params, vertex=None):
    s = run_simulation(params)
    window = find_quiet_window(s.event_log, params.lattice, vertex)
    tab = track_weights(s.event_log, window, params.mu, params.lattice)
    return tab, verify_representation(tab, s.initial_opinions, s.final_opinions)


def test_representation_never_blocked_path():
    p = SimParams(Lattice(50, "path"), theta=2.0, t_max=10, distribution=dist.uniform_box([0], [1]),
                  seed=1, record_events=True)
    tab, err = _check_run(p)
    assert err <= 1e-8
    np.testing.assert_allclose(tab.row_sums(), 1.0, atol=1e-12)
    assert all(check_unimodality(r, 1e-12) for r in tab.weights)


def test_representation_sphere():
    p = SimParams(Lattice(40), theta=3.0, t_max=5, distribution=dist.uniform_sphere(2), seed=2,
                  record_events=True)
    _, err = _check_run(p)
    assert err <= 1e-8


def test_representation_with_blocking_windows():
    for j in range(10):
        p = SimParams(Lattice(300), theta=0.3, t_max=30, distribution=dist.uniform_box([0], [1]),
                      seed=trial_seed(3, j), record_events=True)
        for v in (0, 150):
            tab, err = _check_run(p, v)
            assert err <= 1e-8 and v in tab.vertices
