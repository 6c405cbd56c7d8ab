import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import two_pass_mean_sd, wbe_batch
from satcost.cnf import GeneratorSpec, generate_random_3sat
from satcost.probe import (NOT_THIS_RESTART, SERIES, Probe, RunningStats, WbeState,
                           WindowMode, WindowPolicy, wbe_estimate, wbe_record_branch,
                           window_schedule)
from satcost.solver import SolverConfig, solve

RESTARTS = WindowPolicy(WindowMode.WITH_RESTARTS)


@pytest.mark.parametrize("d", [0, 1, 5, 30])
def test_wbe_single_branch(d):
    est, lg = wbe_estimate(wbe_record_branch(WbeState(), d))
    assert est == pytest.approx(2 ** (d + 1) - 1, rel=1e-12)
    assert lg == pytest.approx(math.log(2 ** (d + 1) - 1), abs=1e-12)


def test_wbe_complete_tree():
    s = WbeState()
    for _ in range(2 ** 6):
        s.record(6)
    assert s.estimate() == pytest.approx(127, rel=1e-12)


def test_wbe_empty_and_negative():
    with pytest.raises(ValueError):
        WbeState().log_estimate()
    with pytest.raises(ValueError):
        WbeState().record(-1)


def test_wbe_huge_depths_no_overflow():
    s = WbeState()
    for d in (5000, 10000, 3):
        s.record(d)
    assert math.isfinite(s.log_estimate())
    assert s.log_estimate() == pytest.approx(wbe_batch([5000, 10000, 3]), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 400), min_size=1, max_size=60))
def test_wbe_matches_batch(depths):
    s = WbeState()
    for d in depths:
        s.record(d)
    assert s.log_estimate() == pytest.approx(wbe_batch(depths), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200))
def test_running_stats_match_two_pass(xs):
    r = RunningStats()
    for x in xs:
        r.push(x)
    m, sd = two_pass_mean_sd(xs)
    s = r.summary()
    scale = max(1.0, max(abs(x) for x in xs))
    assert s["mean"] == pytest.approx(m, abs=1e-9 * scale)
    assert s["sd"] == pytest.approx(sd, abs=1e-6 * scale)
    assert (s["min"], s["max"], s["last"]) == (min(xs), max(xs), xs[-1])
    assert s["min"] <= s["mean"] <= s["max"]


def test_constant_series_has_zero_sd():
    r = RunningStats()
    for _ in range(1000):
        r.push(0.1)
    assert r.sd == pytest.approx(0.0, abs=1e-12)
    assert r.summary()["mean"] == 0.1


def test_window_schedule_restart_mode():
    assert window_schedule(RESTARTS, 200000) == (4000, 2000)
    assert window_schedule(RESTARTS, 1000) is NOT_THIS_RESTART
    assert window_schedule(RESTARTS, 1500) == (500, 1000)
    assert window_schedule(RESTARTS, 1499) is NOT_THIS_RESTART
    # fractional thresholds round up
    assert window_schedule(RESTARTS, 100001) == (2001, 1001)
    with pytest.raises(ValueError):
        window_schedule(RESTARTS, None)


def test_window_schedule_no_restart_mode():
    assert window_schedule(WindowPolicy()) == (500, 1000)


def _probe(seed=5, policy=None, cfg=None, n=100):
    f = generate_random_3sat(GeneratorSpec(n, 4.26, seed))
    p = Probe(f, policy)
    res = solve(f, cfg, [p])
    return f, p, res


def test_no_restart_window_position():
    pol = WindowPolicy(WindowMode.NO_RESTARTS, fixed_wait=30, fixed_size=50)
    f, p, res = _probe(policy=pol, cfg=SolverConfig(restarts_enabled=False))
    assert res.total_conflicts >= 80
    assert len(p.snapshots) == 1
    snap = p.snapshots[0]
    assert snap.close_conflict == 80
    assert snap.event_count == 50
    assert set(snap.stats) == set(SERIES)
    for series, st_ in snap.stats.items():
        assert st_["min"] <= st_["mean"] <= st_["max"], series
        assert st_["sd"] >= 0


def test_restart_mode_windows_one_per_admitting_restart():
    pol = WindowPolicy(WindowMode.WITH_RESTARTS, wait_floor=5, size_floor=10)
    cfg = SolverConfig(restart_base=10, restart_factor=1.5)
    f, p, res = _probe(seed=2, policy=pol, cfg=cfg, n=120)
    assert len(p.snapshots) >= 2
    ks = [s.restart_index for s in p.snapshots]
    assert ks == sorted(set(ks))
    assert [s.ordinal for s in p.snapshots] == list(range(1, len(ks) + 1))
    # restart 1 has limit 10 < 15, so it cannot host a window
    assert ks[0] >= 2


def test_restart_probe_requires_restarts():
    with pytest.raises(ValueError):
        _probe(policy=RESTARTS, cfg=SolverConfig(restarts_enabled=False))


def test_max_windows():
    pol = WindowPolicy(WindowMode.WITH_RESTARTS, wait_floor=5, size_floor=10)
    f = generate_random_3sat(GeneratorSpec(120, 4.26, 2))
    p = Probe(f, pol, max_windows=1)
    solve(f, SolverConfig(restart_base=10), [p])
    assert len(p.snapshots) == 1


def test_probe_does_not_change_search():
    f = generate_random_3sat(GeneratorSpec(100, 4.26, 9))
    a = solve(f)
    b = solve(f, observers=[Probe(f, WindowPolicy(WindowMode.WITH_RESTARTS, 0, 1, 5, 0.02, 10, 0.01))])
    assert (a.verdict, a.total_conflicts) == (b.verdict, b.total_conflicts)


@pytest.mark.parametrize("depths,expect", [([1], 3.0), ([2], 7.0), ([1, 2], 13 / 3)])
def test_wbe_hand_examples(depths, expect):
    s = WbeState()
    for d in depths:
        s.record(d)
    assert s.estimate() == pytest.approx(expect, rel=1e-14)


def test_wbe_denominator_never_decreases():
    s = WbeState()
    prev = -math.inf
    for d in random.Random(1).choices(range(0, 2000), k=500):
        s.record(d)
        assert s.log_denominator >= prev
        prev = s.log_denominator
        assert s.estimate() >= 1.0


def test_snapshot_stat_examples():
    r = RunningStats()
    for x in (2, 2, 2):
        r.push(x)
    assert r.summary() == dict(min=2, max=2, mean=2, sd=0.0, last=2)
    r = RunningStats()
    for x in (1, 3):
        r.push(x)
    assert (r.mean, r.sd) == (2.0, 1.0)  # population convention


def test_streaming_sd_matches_two_pass_on_many_series():
    rng = random.Random(0)
    for _ in range(10_000):
        xs = [rng.uniform(-5, 5) for _ in range(rng.randint(1, 20))]
        r = RunningStats()
        for x in xs:
            r.push(x)
        m, sd = two_pass_mean_sd(xs)
        assert abs(r.mean - m) <= 1e-10 and abs(r.sd - sd) <= 1e-10


class _Spy(Probe):
    """Checks every event fed to a window belongs to the window's restart."""
    def _push(self, w, ev):
        assert ev.restart_index == w.restart_index
        self.pushed = getattr(self, "pushed", 0) + 1
        super()._push(w, ev)


def test_windows_stay_inside_one_restart_and_cost_constant_per_event():
    pol = WindowPolicy(WindowMode.WITH_RESTARTS, wait_floor=5, size_floor=10)
    f = generate_random_3sat(GeneratorSpec(120, 4.26, 2))
    p = _Spy(f, pol)
    solve(f, SolverConfig(restart_base=10), [p])
    assert len(p.snapshots) >= 2
    assert all(s.event_count == 10 for s in p.snapshots)
    # O(1) bookkeeping: a fixed number of primitive updates per windowed event
    assert p.ops == p.pushed * (len(SERIES) + 1)
