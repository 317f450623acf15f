import pytest

from otvsim.netsim.metastability import (MetaFixture, WrongFixture, attack_delay, metastability_schedule_I,
                                         random_delay_control)


def test_first_inversion_happens_at_gamma():
    fx = MetaFixture(1.0, 2.0)
    assert fx.preference_names() == ("x", "x", "y", "y")
    assert fx.play_round() == ("y", "y", "x", "x")
    # each node flips as soon as the other pair's blocks land, and the partner's
    # block at gamma only produces a tie, which keeps the new opinion
    assert sorted(t for t, _, _ in fx.history) == [1.0] * 4


def test_deadlock_lasts():
    rounds = metastability_schedule_I(1.0, 2.0, rounds=12)
    a, b = ("y", "y", "x", "x"), ("x", "x", "y", "y")
    assert rounds == [a if r % 2 == 0 else b for r in range(12)]


def test_schedule():
    assert attack_delay(0, 1, 1, 2) == 2 and attack_delay(2, 3, 1, 2) == 2
    assert attack_delay(0, 2, 1, 2) == 1 and attack_delay(3, 1, 1, 2) == 1


@pytest.mark.parametrize("kw", [dict(n_nodes=5), dict(weights=[1, 1, 1, 2])])
def test_wrong_fixture(kw):
    with pytest.raises(WrongFixture):
        metastability_schedule_I(1.0, 2.0, **kw)


def test_wrong_delays():
    with pytest.raises(WrongFixture):
        MetaFixture(2.0, 1.0)
    with pytest.raises(WrongFixture):
        MetaFixture(1.0, 2.0, initial=("x", "x", "y"))


def test_attack_disabled_converges():
    # every package at delta: simultaneous deliveries are applied one by one,
    # so the first node to see a 3-1 split tips the rest
    fx = MetaFixture(1.0, 2.0, delay_fn=lambda s, d, r: 1.0)
    rounds = [fx.play_round() for _ in range(5)]
    assert len(set(rounds[0])) == 1
    assert rounds == [rounds[0]] * 5


def test_random_delays_break_the_deadlock():
    results = [random_delay_control(1.0, 2.0, seed) for seed in range(40)]
    agreed = [prefs for _, prefs in results if len(set(prefs)) == 1]
    assert len(agreed) >= 10
    # once in agreement nobody leaves it
    fx = MetaFixture(1.0, 2.0, initial=("x",) * 4)
    assert [fx.play_round() for _ in range(3)] == [("x",) * 4] * 3
