"""The uncertainty-based system search agent.

For every window of the last ``s`` pulled arms (a *code*) and every
candidate arm, the agent keeps a ridge regression of the next reward on the
last ``s`` rewards. Arms are scored optimistically: predicted reward plus a
confidence width made of a self-normalised noise term and a bias term.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .numkernel import sherman_morrison_update

__all__ = [
    "InsufficientHistory",
    "UbssConfig",
    "RegressionEntry",
    "UbssAgent",
    "feature_vector",
    "bonus_e",
    "bonus_b",
    "ucb_score",
]


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class UbssConfig:
    """Agent hyperparameters.

    ``b_r`` bounds the reward scale, ``b_g`` the norm of every regression
    vector and ``b_c`` the arm norms. With ``force_explore_unseen`` an arm
    never tried under the current code is pulled before any scoring.
    """

    s: int = 1
    lam: float = 1.0
    delta_e: float = 0.1
    delta_b: float = 0.1
    b_r: float = 1.0
    b_g: float = 1.0
    b_c: float = 1.0
    force_explore_unseen: bool = True

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError("s must be a positive integer")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        for name in ("delta_e", "delta_b"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        for name in ("b_r", "b_g", "b_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class RegressionEntry:
    """Running ridge-regression state for one (code, arm) pair."""

    n: int
    v_inv: np.ndarray
    log_det_v: float
    s_vec: np.ndarray
    g_hat: np.ndarray

    @classmethod
    def empty(cls, s, lam):
        return cls(
            n=0,
            v_inv=np.eye(s) / lam,
            log_det_v=s * math.log(lam),
            s_vec=np.zeros(s),
            g_hat=np.zeros(s),
        )

    def update(self, xi, reward):
        self.n += 1
        self.v_inv, inc = sherman_morrison_update(self.v_inv, xi)
        self.log_det_v += inc
        self.s_vec = self.s_vec + reward * np.asarray(xi, float)
        self.g_hat = self.v_inv @ self.s_vec


def feature_vector(history, s):
    """Last ``s`` rewards, oldest first."""
    if len(history) < s:
        raise InsufficientHistory(f"need {s} rewards, have {len(history)}")
    return np.array(list(history)[len(history) - s:], dtype=float)


def bonus_e(entry, cfg):
    """Self-normalised noise radius, from the running log-determinant."""
    s = len(entry.g_hat)
    log_ratio = 0.5 * (entry.log_det_v - s * math.log(cfg.lam))
    arg = math.log(1.0 / cfg.delta_e) + log_ratio
    return math.sqrt(2.0 * cfg.b_r**2 * max(arg, 0.0))


def bonus_b(entry, cfg):
    """Bias radius from the truncated closed-loop tail plus the ridge term."""
    s = len(entry.g_hat)
    tr_v_inv = float(np.trace(entry.v_inv))
    shrink = max(s - cfg.lam * tr_v_inv, 0.0)
    tail = math.sqrt(entry.n) * cfg.b_c * cfg.b_r / cfg.delta_b * math.sqrt(shrink)
    return tail + cfg.lam * math.sqrt(tr_v_inv) * cfg.b_g


def width(entry, xi):
    return math.sqrt(max(float(xi @ entry.v_inv @ xi), 0.0))


def ucb_score(entry, cfg, xi):
    xi = np.asarray(xi, float)
    return float(entry.g_hat @ xi) + (bonus_e(entry, cfg) + bonus_b(entry, cfg)) * width(
        entry, xi
    )


@dataclass
class UbssAgent:
    """Stateful learner for one episode.

    Use :meth:`select` to pick an arm and :meth:`observe` to report the
    resulting reward. The first ``s`` rounds are uniform warm-up pulls; they
    fill the reward history but train no model.
    """

    k: int
    cfg: UbssConfig
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rewards = deque(maxlen=self.cfg.s)
        self.actions = deque(maxlen=self.cfg.s)
        self.t = 0
        self._pending = None

    def entry(self, code, action):
        key = (tuple(code), int(action))
        e = self.entries.get(key)
        if e is None:
            e = self.entries[key] = RegressionEntry.empty(self.cfg.s, self.cfg.lam)
        return e

    def peek(self, code, action):
        return self.entries.get((tuple(code), int(action)))

    def current_code(self):
        if len(self.actions) < self.cfg.s:
            return None
        return tuple(self.actions)

    def scores(self, code, xi):
        empty = RegressionEntry.empty(self.cfg.s, self.cfg.lam)
        return np.array(
            [ucb_score(self.peek(code, a) or empty, self.cfg, xi) for a in range(self.k)]
        )

    def select_action(self, code, xi, rng):
        if self.cfg.force_explore_unseen:
            unseen = [a for a in range(self.k) if self.peek(code, a) is None]
            if unseen:
                return int(unseen[rng.integers(len(unseen))])
        sc = self.scores(code, xi)
        best = np.flatnonzero(sc == sc.max())
        return int(best[rng.integers(len(best))]) if len(best) > 1 else int(best[0])

    def update(self, code, action, xi, reward):
        self.entry(code, action).update(xi, reward)

    def select(self, rng):
        code = self.current_code()
        if code is None:
            action = int(rng.integers(self.k))
            self._pending = None
        else:
            xi = feature_vector(self.rewards, self.cfg.s)
            action = self.select_action(code, xi, rng)
            self._pending = (code, xi)
        return action

    def observe(self, action, reward):
        if self._pending is not None:
            code, xi = self._pending
            self.update(code, action, xi, reward)
            self._pending = None
        self.rewards.append(float(reward))
        self.actions.append(int(action))
        self.t += 1

    def to_dict(self):
        return {
            "config": asdict(self.cfg),
            "entries": [
                {
                    "code": list(code),
                    "action": action,
                    "n": e.n,
                    "g_hat": e.g_hat.tolist(),
                    "log_det_v": e.log_det_v,
                }
                for (code, action), e in sorted(self.entries.items())
            ],
        }

    def dump_json(self):
        return json.dumps(self.to_dict(), indent=2)
