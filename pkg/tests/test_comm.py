import numpy as np
import pytest
from hypothesis import given, strategies as st

from distbandits.comm import (
    CommLedger,
    PublicRandomness,
    Server,
    agent_rng,
    public_rand_assign,
    record_every_step,
    record_transfer,
)
from distbandits.env import UsageError


def test_record_transfer_examples():
    ledger = CommLedger()
    record_transfer(ledger, "a", 5)
    assert ledger.total_scalars == 5
    record_transfer(ledger, "a", 3)
    assert ledger.total_scalars == 8

    ledger = CommLedger()
    record_transfer(ledger, "x", 4)
    record_transfer(ledger, "y", 6)
    assert ledger.total_scalars == 10
    assert sum(c for _, c in ledger.per_phase) == 10
    assert ledger.by_label() == {"x": 4, "y": 6}


@pytest.mark.parametrize("count", [0, -1, 1.5, True])
def test_no_free_or_fractional_messages(count):
    with pytest.raises(UsageError):
        record_transfer(CommLedger(), "p", count)


@given(st.lists(st.tuples(st.sampled_from("abc"), st.integers(1, 1000), st.integers(0, 5)), max_size=40))
def test_ledger_totals_consistent(transfers):
    ledger = CommLedger()
    running = []
    clock = 0
    for label, count, advance in transfers:
        clock += advance
        ledger.clock = clock
        record_transfer(ledger, label, count)
        running.append(ledger.total_scalars)
    assert ledger.total_scalars == sum(c for _, c, _ in transfers)
    assert ledger.total_scalars == sum(c for _, c in ledger.per_phase)
    assert running == sorted(running)
    T = clock + 3
    cum = ledger.cumulative(T)
    assert cum.shape == (T,)
    assert np.all(np.diff(cum) >= 0)
    assert cum[-1] == ledger.total_scalars


def test_cumulative_alignment():
    ledger = CommLedger()
    record_transfer(ledger, "init", 4)  # before step 1
    ledger.clock = 2
    record_transfer(ledger, "sync", 3)  # after step 2
    np.testing.assert_array_equal(ledger.cumulative(4), [4, 7, 7, 7])


def test_server_skips_empty_messages():
    ledger = CommLedger()
    s = Server(ledger)
    s.upload("u", 0)
    s.broadcast("b", 0, 5)
    assert s.exchange("e", [1, 2], lambda _: 0) == [1, 2]
    assert ledger.total_scalars == 0
    s.broadcast("b", 3, 4)
    s.exchange("e", [np.zeros(2), np.zeros(3)], lambda p: p.size)
    assert ledger.by_label() == {"b": 12, "e": 5}


def test_seed_broadcast_costs_M():
    ledger = CommLedger()
    PublicRandomness.attach(17, 6, ledger)
    assert ledger.total_scalars == 6
    assert ledger.by_label() == {"seed-broadcast": 6}


def test_public_assign_single_agent():
    r = public_rand_assign(50, 1, PublicRandomness(3))
    assert np.all(r == 1)


def test_public_assign_uniform_frequencies():
    r = public_rand_assign(100_000, 4, PublicRandomness(0))
    freq = np.bincount(r, minlength=5)[1:] / r.size
    assert r.min() >= 1 and r.max() <= 4
    assert np.all(np.abs(freq - 0.25) <= 0.01)


@given(st.integers(0, 2**63), st.integers(1, 200), st.integers(1, 30))
def test_public_readers_agree(seed, K, M):
    a = public_rand_assign(K, M, PublicRandomness(seed))
    b = public_rand_assign(K, M, PublicRandomness(seed))
    np.testing.assert_array_equal(a, b)
    assert np.all((a >= 1) & (a <= M))


def test_public_assign_rejects_bad_sizes():
    with pytest.raises(UsageError):
        public_rand_assign(0, 3, PublicRandomness(0))


def test_streams_are_separated():
    pub = PublicRandomness(9).integers(0, 2**30, 8)
    priv = agent_rng(9, 0).integers(0, 2**30, 8, endpoint=True)
    other = agent_rng(9, 1).integers(0, 2**30, 8, endpoint=True)
    assert not np.array_equal(pub, priv)
    assert not np.array_equal(priv, other)
    np.testing.assert_array_equal(priv, agent_rng(9, 0).integers(0, 2**30, 8, endpoint=True))


@given(st.integers(0, 5), st.integers(1, 40), st.integers(0, 9), st.integers(1, 9))
def test_bulk_step_charges_match_loop(pre, steps, a, b):
    looped, bulk = CommLedger(), CommLedger()
    for ledger in (looped, bulk):
        if pre:
            record_transfer(ledger, "init", pre)
    for t in range(1, steps + 1):
        looped.clock = t
        for label, c in (("a", a), ("b", b)):
            if c:
                record_transfer(looped, label, c)
    record_every_step(bulk, [("a", a), ("b", b)], 1, steps)
    assert bulk.total_scalars == looped.total_scalars
    assert bulk.by_label() == looped.by_label()
    np.testing.assert_array_equal(bulk.cumulative(steps), looped.cumulative(steps))


def test_bulk_charges_must_follow_history():
    ledger = CommLedger()
    ledger.clock = 5
    record_transfer(ledger, "x", 1)
    with pytest.raises(UsageError):
        record_every_step(ledger, [("y", 2)], 3, 10)
