"""Reference policies: UCB1, sliding-window UCB and uniform random play.

All policies share the ``select(rng) -> arm`` / ``observe(arm, reward)``
protocol used by the episode runner. Arms are 0-based.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np

__all__ = ["UCB1", "SlidingWindowUCB", "RandomPolicy", "random_select"]


class UCB1:
    """UCB1 with index ``mean_a + alpha * sqrt(2 ln t / n_a)``.

    Every arm is pulled once, in index order, before the index is used.
    """

    def __init__(self, k, alpha=1.0):
        self.k = k
        self.alpha = alpha
        self.counts = np.zeros(k, dtype=int)
        self.sums = np.zeros(k)
        self.t = 0

    def indices(self):
        means = self.sums / self.counts
        return means + self.alpha * np.sqrt(2.0 * math.log(self.t) / self.counts)

    def select(self, rng=None):
        if self.t < self.k:
            return self.t
        return int(np.argmax(self.indices()))

    def observe(self, action, reward):
        self.counts[action] += 1
        self.sums[action] += reward
        self.t += 1


class SlidingWindowUCB:
    """UCB restricted to the last ``tau`` plays.

    Index: ``windowed_mean_a + b * sqrt(xi * ln(min(t, tau)) / N_a)`` where
    ``N_a`` counts plays of ``a`` inside the window. Rewards here are
    unbounded, so unless ``b_scale`` is given ``b`` tracks the running
    standard deviation of all rewards seen. ``tau=None`` disables the window.
    """

    def __init__(self, k, tau=500, xi_exp=0.6, b_scale=None):
        if tau is not None and tau < 1:
            raise ValueError("tau must be positive")
        self.k = k
        self.tau = tau
        self.xi_exp = xi_exp
        self.b_scale = b_scale
        self.window = deque(maxlen=tau)
        self.win_counts = np.zeros(k, dtype=int)
        self.win_sums = np.zeros(k)
        self.t = 0
        # Welford accumulators for the reward scale
        self._n = 0
        self._mean = 0.0
        self._m2 = 0.0

    @property
    def scale(self):
        if self.b_scale is not None:
            return self.b_scale
        if self._n < 2:
            return 1.0
        return math.sqrt(self._m2 / (self._n - 1))

    def indices(self):
        horizon = self.t if self.tau is None else min(self.t, self.tau)
        means = self.win_sums / self.win_counts
        return means + self.scale * np.sqrt(
            self.xi_exp * math.log(horizon) / self.win_counts
        )

    def select(self, rng=None):
        missing = np.flatnonzero(self.win_counts == 0)
        if len(missing):
            return int(missing[0])
        return int(np.argmax(self.indices()))

    def observe(self, action, reward):
        if self.tau is not None and len(self.window) == self.tau:
            old_a, old_r = self.window[0]
            self.win_counts[old_a] -= 1
            self.win_sums[old_a] -= old_r
        self.window.append((action, reward))
        self.win_counts[action] += 1
        self.win_sums[action] += reward
        self.t += 1
        self._n += 1
        d = reward - self._mean
        self._mean += d / self._n
        self._m2 += d * (reward - self._mean)

    def recount(self):
        """Brute-force window statistics, for cross-checking the running ones."""
        counts = np.zeros(self.k, dtype=int)
        sums = np.zeros(self.k)
        for a, r in self.window:
            counts[a] += 1
            sums[a] += r
        return counts, sums


def random_select(k, rng):
    return int(rng.integers(k))


class RandomPolicy:
    def __init__(self, k):
        self.k = k

    def select(self, rng):
        return random_select(self.k, rng)

    def observe(self, action, reward):
        pass
