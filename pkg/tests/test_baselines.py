import math

import numpy as np
import pytest

from ubss.baselines import UCB1, RandomPolicy, SlidingWindowUCB, random_select


def feed(policy, means, counts):
    for a, (m, n) in enumerate(zip(means, counts)):
        for _ in range(n):
            policy.observe(a, m)


def test_ucb_warm_start_in_index_order():
    p = UCB1(3)
    order = []
    for _ in range(3):
        a = p.select()
        order.append(a)
        p.observe(a, 0.0)
    assert order == [0, 1, 2]


def test_ucb_index_example():
    p = UCB1(2, alpha=1.0)
    feed(p, (1.0, 0.5), (10, 10))
    bonus = math.sqrt(2 * math.log(20) / 10)
    np.testing.assert_allclose(p.indices(), [1.0 + bonus, 0.5 + bonus])
    np.testing.assert_allclose(p.indices(), [1.7740, 1.2740], atol=1e-4)
    assert p.select() == 0


def test_ucb_alpha_zero_is_greedy():
    p = UCB1(3, alpha=0.0)
    feed(p, (0.2, 0.9, 0.5), (1, 50, 3))
    assert p.select() == 1


def test_swucb_picks_missing_arm():
    p = SlidingWindowUCB(3, tau=4)
    for _ in range(4):
        p.observe(0, 1.0)
    assert p.select() == 1


def test_swucb_index_example():
    p = SlidingWindowUCB(2, tau=100, xi_exp=0.6, b_scale=1.0)
    for _ in range(200):
        p.observe(0, 0.0)
    for t in range(100):
        p.observe(t % 2, 2.0 if t % 2 == 0 else 1.0)
    np.testing.assert_array_equal(p.win_counts, [50, 50])
    bonus = math.sqrt(0.6 * math.log(100) / 50)
    np.testing.assert_allclose(p.indices(), [2 + bonus, 1 + bonus])
    # with window counts of 5 each the bonus is about 0.7433
    assert math.sqrt(0.6 * math.log(100) / 5) == pytest.approx(0.7433, abs=1e-4)
    assert p.select() == 0


def test_swucb_window_recount(rng):
    p = SlidingWindowUCB(3, tau=25)
    for _ in range(400):
        a = p.select()
        p.observe(a, float(rng.standard_normal()))
        counts, sums = p.recount()
        np.testing.assert_array_equal(counts, p.win_counts)
        np.testing.assert_allclose(sums, p.win_sums, atol=1e-9)
    assert p.win_counts.sum() == 25


def test_swucb_unbounded_equals_ucb(rng):
    # b * sqrt(2 ln t / n) is the UCB1 index with alpha = b
    b = 2.0
    ucb = UCB1(3, alpha=b)
    sw = SlidingWindowUCB(3, tau=None, xi_exp=2.0, b_scale=b)
    means = np.array([0.1, 0.4, 0.2])
    for _ in range(500):
        a, a2 = ucb.select(), sw.select()
        assert a == a2
        r = float(means[a] + rng.standard_normal())
        ucb.observe(a, r)
        sw.observe(a, r)
    np.testing.assert_allclose(sw.indices(), ucb.indices(), atol=1e-12)


def test_swucb_scale_tracks_reward_spread(rng):
    p = SlidingWindowUCB(2, tau=50)
    rewards = 7.0 * rng.standard_normal(2000)
    for i, r in enumerate(rewards):
        p.observe(i % 2, r)
    assert p.scale == pytest.approx(rewards.std(ddof=1), rel=1e-9)


def test_ucb_stationary_regret_is_small():
    rng = np.random.default_rng(2)
    means = np.array([0.0, 1.0])
    regrets = []
    for _ in range(20):
        p = UCB1(2)
        regret = 0.0
        for _ in range(2000):
            a = p.select()
            p.observe(a, float(means[a] + rng.standard_normal()))
            regret += means.max() - means[a]
        regrets.append(regret)
    assert np.mean(regrets) <= 150


def test_random_select():
    assert random_select(1, np.random.default_rng(0)) == 0
    rng = np.random.default_rng(8)
    draws = [random_select(2, rng) for _ in range(10_000)]
    assert abs(np.mean(draws) - 0.5) <= 0.05
    a = [random_select(5, np.random.default_rng(3)) for _ in range(3)]
    assert len(set(a)) == 1
    p = RandomPolicy(4)
    p.observe(1, 2.0)
    assert 0 <= p.select(rng) < 4
