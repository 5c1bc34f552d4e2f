import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srptlab.dists import ParetoTypeI, heavy_traffic_arrival_rate, poisson_arrivals, scale_parameter
from srptlab.scalemeas import qlxy_violations
from srptlab.srpt_core import (ARRIVAL, COMPLETION, IDLE_START, PREEMPTION, ArrivalStream, Job,
                               InitialConditionSpec, QueueState, SizeLaw, Trajectory,
                               coupled_truncated_runs, draw_stream, generate_initial,
                               intertwined_pair_sim, is_intertwined, iter_states, jobs_from_sizes,
                               run_srpt, simulate_srpt, state_at)

HAND = ArrivalStream.from_pairs([(1.0, 3.0), (2.0, 1.0)])


def hand_run(threshold=math.inf):
    return run_srpt([], HAND, 20.0, threshold=threshold)


def completions(traj):
    return [(t, j) for t, k, j in zip(traj.times, traj.kinds, traj.job_ids) if k == COMPLETION]


def test_empty_system():
    traj = run_srpt([], ArrivalStream.empty(), 10.0)
    assert len(traj) == 0
    assert state_at(traj, 5.0).remaining == ()
    assert traj.queue_length_at([0.0, 10.0]).tolist() == [0, 0]


def test_hand_trace():
    traj = hand_run()
    # job 1 gets 1 unit before job 2 arrives, job 2 runs on [2, 3], job 1 finishes its
    # remaining 2 units on [3, 5]
    assert completions(traj) == [(3.0, 2), (5.0, 1)]
    knots, q = traj.queue_length_path()
    assert knots.tolist() == [0.0, 1.0, 2.0, 3.0, 5.0]
    assert q.tolist() == [0, 1, 2, 1, 0]
    kinds = [k for k, t in zip(traj.kinds, traj.times) if t == 2.0]
    assert PREEMPTION in kinds
    assert IDLE_START in traj.kinds.tolist()


def test_single_initial_job():
    traj = run_srpt(jobs_from_sizes([5.0]), ArrivalStream.empty(), 10.0)
    assert completions(traj) == [(5.0, -1)]


def test_state_at_examples():
    traj = hand_run()
    s = state_at(traj, 2.5)
    assert s.remaining == ((0.5, 2), (2.0, 1))
    assert state_at(traj, 10.0).remaining == ()
    assert state_at(run_srpt([], ArrivalStream.empty(), 1.0), 0.0).remaining == ()
    with pytest.raises(ValueError):
        state_at(traj, 25.0)
    with pytest.raises(ValueError):
        state_at(traj, -1.0)


def test_iter_states_left_limits():
    traj = hand_run()
    left = [s.remaining for s in iter_states(traj, [2.0, 3.0, 5.0], side="left")]
    # a job whose remaining size has run down to 0 is no longer an atom
    assert left == [((2.0, 1),), ((2.0, 1),), ()]


def test_equal_sizes_served_by_lower_id():
    traj = run_srpt(jobs_from_sizes([1.0, 1.0]), ArrivalStream.empty(), 5.0)
    assert completions(traj) == [(1.0, -2), (2.0, -1)]


def test_no_preemption_on_equal_size():
    stream = ArrivalStream.from_pairs([(0.0, 2.0), (1.0, 1.0)])
    traj = run_srpt([], stream, 5.0)
    assert PREEMPTION not in traj.kinds.tolist()


def test_generate_initial_examples():
    assert generate_initial(InitialConditionSpec(), 100.0, 12.2474, 0) == []
    spec = InitialConditionSpec("iid", q_star=1.0, size_law=SizeLaw("constant", 1.0))
    jobs = generate_initial(spec, 100.0, 12.2474, 0)
    assert len(jobs) == 8
    assert all(j.initial_size == pytest.approx(12.2474) and j.origin == "initial" for j in jobs)


@pytest.mark.parametrize("r", [1e2, 1e3, 1e4])
def test_scaled_initial_count_converges(pareto12, r):
    c = scale_parameter(pareto12, r)
    spec = InitialConditionSpec("iid", q_star=1.0, size_law=SizeLaw("constant", 1.0))
    q = len(generate_initial(spec, r, c, 0))
    assert abs(c / r * q - 1.0) <= c / r


def test_generate_initial_poisson_mean(pareto12):
    c = scale_parameter(pareto12, 100.0)
    spec = InitialConditionSpec("iid", q_star=2.0, size_law=SizeLaw("exponential", mean_=1.0),
                                count_mode="poisson")
    counts = [len(generate_initial(spec, 100.0, c, s)) for s in range(400)]
    target = 2.0 * 100.0 / c
    assert abs(np.mean(counts) - target) < 4 * math.sqrt(target / 400)


def test_coupled_truncated_examples():
    full = hand_run()
    inf_run, zero_run, two_run = (coupled_truncated_runs([], HAND, 20.0, [0.0, 2.0, math.inf]) [i]
                                  for i in (2, 0, 1))
    np.testing.assert_array_equal(inf_run.times, full.times)
    np.testing.assert_array_equal(inf_run.kinds, full.kinds)
    np.testing.assert_array_equal(inf_run.workload, full.workload)
    assert len(zero_run) == 0
    s = state_at(two_run, 2.5)
    assert s.remaining == ((0.5, 2),)


def test_threshold_inf_matches_simulate(pareto12):
    lam = heavy_traffic_arrival_rate(pareto12, 25.0, 0.0)
    stream = draw_stream(poisson_arrivals(), pareto12, lam, 625.0, 3)
    a = simulate_srpt(poisson_arrivals(), pareto12, lam, [], 625.0, 3)
    b = coupled_truncated_runs([], stream, 625.0, [math.inf])[0]
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.job_ids, b.job_ids)


def test_thresholds_must_ascend():
    with pytest.raises(ValueError):
        coupled_truncated_runs([], HAND, 10.0, [2.0, 1.0])


@pytest.mark.parametrize("s1, s2, expected", [
    ([1, 3], [1, 2.5, 3.5], (1, 2)),
    ([2], [2, 5], (1, 1)),
    ([1, 3], [1, 5], None),
])
def test_is_intertwined_examples(s1, s2, expected):
    assert is_intertwined(s1, s2) == expected
    assert is_intertwined(QueueState.from_sizes(s1), QueueState.from_sizes(s2)) == expected


def test_pair_sim_hand():
    pair = intertwined_pair_sim(None, None, None, [], [1.0], 5.0, 0, stream=ArrivalStream.empty())
    d = pair.q2 - pair.q1
    assert d[pair.times < 1.0].tolist() == [1]
    assert np.all(d[pair.times >= 1.0] == 0)


def test_pair_sim_rejects_bad_start():
    with pytest.raises(ValueError):
        intertwined_pair_sim(None, None, None, [1.0, 3.0], [1.0, 5.0], 5.0, 0, stream=ArrivalStream.empty())
    with pytest.raises(ValueError):
        intertwined_pair_sim(None, None, None, [1.0], [1.0], 5.0, 0, stream=ArrivalStream.empty())


def test_pair_sim_seed7_exhaustive(pareto12):
    lam = heavy_traffic_arrival_rate(pareto12, 25.0, 0.0)
    pair = intertwined_pair_sim(poisson_arrivals(), pareto12, lam, [1.0, 3.0], [1.0, 2.5, 3.5], 2000.0, 7)
    d = pair.q2 - pair.q1
    assert len(pair.times) > 100
    assert np.all((d >= 0) & (d <= 1))


def _intertwined_either_way(s1, s2, tol):
    if len(s1) == len(s2) and np.allclose(np.sort(s1.sizes), np.sort(s2.sizes), atol=tol, rtol=0):
        return True
    return is_intertwined(s1, s2, tol) is not None or is_intertwined(s2, s1, tol) is not None


@pytest.mark.parametrize("seed", range(10))
def test_intertwining_preserved(pareto12, seed):
    lam = heavy_traffic_arrival_rate(pareto12, 25.0, 0.0)
    pair = intertwined_pair_sim(poisson_arrivals(), pareto12, lam, [1.0, 3.0], [1.0, 2.5, 3.5], 600.0, seed)
    r1, r2 = pair.runs
    for t, s1, s2 in zip(pair.times, iter_states(r1, pair.times), iter_states(r2, pair.times)):
        assert _intertwined_either_way(s1, s2, 1e-9), (t, s1, s2)


def fifo_queue_length(initial_sizes, stream, times):
    """Number in system under FIFO: initial jobs first, then arrivals in order."""
    clock, departures = 0.0, []
    for v in initial_sizes:
        clock += v
        departures.append(clock)
    for a, v in zip(stream.times, stream.sizes):
        clock = max(clock, a) + v
        departures.append(clock)
    departures = np.sort(departures)
    arrived = len(initial_sizes) + np.searchsorted(stream.times, times, side="right")
    return arrived - np.searchsorted(departures, times, side="right")


@pytest.mark.parametrize("seed", range(50))
def test_srpt_never_longer_than_fifo(pareto12, seed):
    lam = heavy_traffic_arrival_rate(pareto12, 10.0, 0.0)
    rng = np.random.default_rng(seed)
    init = list(pareto12.sample(rng, int(rng.integers(0, 4))))
    stream = draw_stream(poisson_arrivals(), pareto12, lam, 300.0, seed)
    traj = run_srpt(jobs_from_sizes(init), stream, 300.0)
    t = np.unique(np.concatenate([[0.0], traj.times]))
    assert np.all(traj.queue_length_at(t) <= fifo_queue_length(init, stream, t))


@pytest.mark.parametrize("seed", range(5))
def test_work_conservation(pareto12, seed):
    lam = heavy_traffic_arrival_rate(pareto12, 10.0, 0.0)
    traj = simulate_srpt(poisson_arrivals(), pareto12, lam, jobs_from_sizes([2.0, 4.0]), 400.0, seed)
    prev_t, prev_w = 0.0, 0.0
    for t, k, d, w, q in zip(traj.times, traj.kinds, traj.size_deltas, traj.workload, traj.queue_len):
        expected = max(prev_w - (t - prev_t), 0.0) + (d if k in (ARRIVAL, 4) else 0.0)
        assert w == pytest.approx(expected, abs=1e-9)
        assert (q == 0) == (w <= 1e-9)
        prev_t, prev_w = t, w


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0.01, 10)), max_size=40),
       st.lists(st.floats(0.01, 10), max_size=4))
def test_random_streams_invariants(pairs, init):
    stream = ArrivalStream.from_pairs(sorted(pairs))
    traj = run_srpt(jobs_from_sizes(init), stream, 100.0)
    assert np.all(np.diff(traj.times) >= 0)
    assert np.all(traj.queue_len >= 0)
    assert np.all(traj.workload >= -1e-12)
    total = sum(init) + sum(v for _, v in pairs)
    if total < 100.0 - 50.0:
        # everything has arrived by 50 and the server never idles with work
        assert state_at(traj, 100.0).remaining == ()


@pytest.mark.parametrize("seed", range(3))
def test_truncation_nested_and_qlxy(pareto12, seed):
    r = 25.0
    c = scale_parameter(pareto12, r)
    lam = heavy_traffic_arrival_rate(pareto12, r, 0.0)
    stream = draw_stream(poisson_arrivals(), pareto12, lam, r * r, seed)
    levels = [0.25, 0.5, 1.0, 2.0, math.inf]
    runs = coupled_truncated_runs([], stream, r * r, [a * c for a in levels])
    ids = [set(run.admitted()[2].tolist()) for run in runs]
    assert all(a <= b for a, b in zip(ids, ids[1:]))
    for (x, rx), (y, ry) in zip(zip(levels, runs), zip(levels[1:], runs[1:])):
        v = qlxy_violations(rx, ry, x, y, r, c)
        assert v["lower"] == 0 and v["upper"] == 0


def test_trajectory_csv_round_trip(tmp_path, pareto12):
    lam = heavy_traffic_arrival_rate(pareto12, 10.0, 0.0)
    traj = simulate_srpt(poisson_arrivals(), pareto12, lam, jobs_from_sizes([1.5]), 100.0, 11)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    back = Trajectory.from_csv(path)
    for name in ("times", "kinds", "job_ids", "size_deltas", "queue_len", "workload"):
        np.testing.assert_array_equal(getattr(back, name), getattr(traj, name))
    assert back.horizon == traj.horizon
    assert state_at(back, 50.0) == state_at(traj, 50.0)


def test_job_validation():
    with pytest.raises(ValueError):
        Job(1, 0.0, 0.0, "external")
