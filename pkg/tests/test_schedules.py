"""Activation schedules: covering, lag bounds, determinism."""

import pytest

from nashsplit.schedules import Schedule, audit, cyclic, randomized, synchronous


def test_synchronous_full_activation_zero_lag():
    sched = synchronous()
    for n in (0, 1, 17, 500):
        tick = sched.next_tick(n, 3, 2)
        assert tick.active_players == (0, 1, 2)
        assert tick.active_couplings == (0, 1)
        assert all(tau == n for tau in tick.player_lags.values())
        assert all(delta == n for delta in tick.coupling_lags.values())


def test_cyclic_round_robin_with_forced_first_tick():
    sched = cyclic(block_size=1, window=2)
    seen = [sched.next_tick(n, 3, 0).active_players for n in range(5)]
    assert seen[0] == (0, 1, 2)   # full first tick is mandatory
    assert seen[1] == (1,)
    assert seen[2] == (2,)
    assert seen[3] == (0,)
    assert seen[4] == (1,)


def test_cyclic_audit_clean():
    assert audit(cyclic(block_size=1, window=2), 200, 3, 3) == []
    assert audit(cyclic(block_size=2, window=1), 200, 4, 2) == []


def test_synchronous_audit_clean():
    assert audit(synchronous(), 100, 4, 1) == []


def test_too_small_window_reports_covering_violation():
    # with window 0 every tick must activate every block; cyclic singles cannot
    report = audit(cyclic(block_size=1, window=0), 10, 3, 0)
    assert any("never activated" in line for line in report)


def test_random_schedule_replay_invariants():
    sched = randomized(seed=11, activation_prob=0.5, max_lag=3, window=4)
    num_players, num_coups = 4, 2
    history = []
    for n in range(1000):
        tick = sched.next_tick(n, num_players, num_coups)
        assert tick.active_players
        assert tick.active_couplings
        lo = max(0, n - 3)
        for i, tau in tick.player_lags.items():
            assert lo <= tau <= n
        for k, delta in tick.coupling_lags.items():
            assert lo <= delta <= n
        history.append(set(tick.active_players))
        if n >= 4:
            assert set().union(*history[n - 4:n + 1]) == set(range(num_players))
    assert history[0] == set(range(num_players))


def test_random_schedule_audit_long_horizon():
    sched = randomized(seed=3, activation_prob=0.35, max_lag=5, window=4)
    assert audit(sched, 10_000, 3, 1) == []


def test_random_schedule_deterministic_replay():
    sched = randomized(seed=42, activation_prob=0.5, max_lag=4, window=3)
    first = [sched.next_tick(n, 5, 2) for n in range(200)]
    second = [sched.next_tick(n, 5, 2) for n in range(200)]
    for a, b in zip(first, second):
        assert a == b


def test_random_low_probability_never_empty():
    sched = randomized(seed=1, activation_prob=0.02, max_lag=0, window=6)
    for n in range(300):
        tick = sched.next_tick(n, 3, 2)
        assert tick.active_players
        assert tick.active_couplings


def test_schedule_rejects_bad_fields():
    with pytest.raises(ValueError):
        Schedule("nonsense")
    with pytest.raises(ValueError):
        Schedule("random", max_lag=-1)
    with pytest.raises(ValueError):
        Schedule("random", activation_prob=0.0)
    with pytest.raises(ValueError):
        Schedule("cyclic", block_size=0)
