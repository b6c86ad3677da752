"""Restless bandit environment driven by a linear Gaussian state-space model.

The hidden state evolves as ``z <- Gamma z + xi`` with ``xi ~ N(0, Q)``
regardless of what the learner does; pulling arm ``a`` reveals
``<c_a, z> + eta`` with ``eta ~ N(0, noise_var)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .numkernel import (
    DimensionMismatch,
    cholesky,
    is_schur_stable,
    solve_discrete_lyapunov,
    symmetrize,
)

__all__ = [
    "BadActionIndex",
    "LgdsParams",
    "EnvState",
    "StepOutcome",
    "make_rotation_lgds",
    "make_scalar_lgds",
    "init_steady_state",
    "stationary_covariance",
    "step",
    "instantaneous_regret",
    "observability_gramian",
]


class BadActionIndex(IndexError):
    pass


@dataclass(frozen=True, eq=False)
class LgdsParams:
    """Immutable description of the environment.

    Parameters
    ----------
    gamma : (d, d) array
        State transition matrix.
    q : (d, d) array
        Process-noise covariance.
    noise_var : float
        Variance of the scalar measurement noise.
    actions : (k, d) array
        One row per arm.
    b_c : float, optional
        Known bound on the arm norms; defaults to the largest norm.
    """

    gamma: np.ndarray
    q: np.ndarray
    noise_var: float
    actions: np.ndarray
    b_c: float | None = None

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float, ndmin=2)
        q = symmetrize(np.array(self.q, dtype=float, ndmin=2))
        actions = np.array(self.actions, dtype=float)
        if actions.ndim == 1:
            actions = actions.reshape(-1, 1)
        d = gamma.shape[0]
        if gamma.shape != (d, d) or q.shape != (d, d) or actions.shape[1] != d:
            raise DimensionMismatch(
                f"gamma {gamma.shape}, q {q.shape}, actions {actions.shape}"
            )
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if np.linalg.eigvalsh(q).min() < -1e-10:
            raise ValueError("q must be positive semidefinite")
        norms = np.linalg.norm(actions, axis=1)
        b_c = float(norms.max()) if self.b_c is None else float(self.b_c)
        if np.any(norms > b_c * (1 + 1e-12)):
            raise ValueError(f"action norm {norms.max():g} exceeds b_c={b_c:g}")
        gamma.flags.writeable = False
        q.flags.writeable = False
        actions.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "noise_var", float(self.noise_var))
        object.__setattr__(self, "b_c", b_c)
        if not is_schur_stable(gamma * (1 - 1e-9)):
            warnings.warn("gamma has spectral radius above one", RuntimeWarning)

    @property
    def d(self):
        return self.gamma.shape[0]

    @property
    def k(self):
        return self.actions.shape[0]

    @cached_property
    def q_chol(self):
        ridge = 1e-12 * max(1.0, float(np.trace(self.q)) / self.d)
        return cholesky(self.q + ridge * np.eye(self.d))

    def to_dict(self):
        return {
            "gamma": self.gamma.tolist(),
            "q": self.q.tolist(),
            "noise_var": self.noise_var,
            "actions": self.actions.tolist(),
            "b_c": self.b_c,
        }

    @classmethod
    def from_dict(cls, doc):
        missing = {"gamma", "q", "noise_var", "actions"} - set(doc)
        if missing:
            raise ValueError(f"system description lacks {sorted(missing)}")
        return cls(
            gamma=doc["gamma"],
            q=doc["q"],
            noise_var=doc["noise_var"],
            actions=doc["actions"],
            b_c=doc.get("b_c"),
        )

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source):
        """Load from a JSON string or a path to a JSON file."""
        if isinstance(source, Path) or (
            isinstance(source, str) and not source.lstrip().startswith("{")
        ):
            source = Path(source).read_text()
        return cls.from_dict(json.loads(source))


@dataclass
class EnvState:
    z: np.ndarray
    rng: np.random.Generator
    t: int = 0


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    best_mean: float
    best_action: int
    chosen_mean: float
    action: int = field(default=-1)


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def make_rotation_lgds(theta):
    """The four-dimensional rotation benchmark with two axis-aligned arms.

    ``Gamma = [[0.9 R(theta), I], [0, 0.9 R(theta)]]``, unit process and
    measurement noise, arms ``10 e_1`` and ``10 e_2``.
    """
    r = 0.9 * rotation(theta)
    gamma = np.zeros((4, 4))
    gamma[:2, :2] = r
    gamma[2:, 2:] = r
    gamma[:2, 2:] = np.eye(2)
    actions = np.array([[10.0, 0, 0, 0], [0, 10.0, 0, 0]])
    return LgdsParams(gamma=gamma, q=np.eye(4), noise_var=1.0, actions=actions, b_c=10.0)


def make_scalar_lgds(gamma=0.5, q=1.0, noise_var=1.0, actions=(1.0,)):
    """One-dimensional system, handy for closed-form checks."""
    return LgdsParams(
        gamma=[[gamma]], q=[[q]], noise_var=noise_var,
        actions=np.asarray(actions, float).reshape(-1, 1),
    )


def stationary_covariance(params):
    """Stationary state covariance ``Z = Gamma Z Gamma' + Q``."""
    return solve_discrete_lyapunov(params.gamma.T, params.q)


def init_steady_state(params, burn_in, rng, stationary=False):
    """Start from ``z = 0`` and run ``burn_in`` unobserved transitions.

    With ``stationary=True`` the initial state is drawn from the stationary
    law instead (requires a stable ``gamma``); ``burn_in`` is ignored.
    """
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    if stationary:
        z = cholesky(stationary_covariance(params)) @ rng.standard_normal(params.d)
        return EnvState(z=z, rng=rng)
    z = np.zeros(params.d)
    gamma, chol = params.gamma, params.q_chol
    for _ in range(burn_in):
        z = gamma @ z + chol @ rng.standard_normal(params.d)
    return EnvState(z=z, rng=rng)


def step(state, params, action):
    """Pull ``action``, then advance the hidden state by one transition.

    The measurement noise is drawn every round and shared by all arms, so
    the counterfactual best reward differs from the realised one only by
    the mean gap. Randomness consumed per call does not depend on
    ``action``.
    """
    if not 0 <= action < params.k:
        raise BadActionIndex(f"action {action} outside [0, {params.k})")
    noise = state.rng.standard_normal(params.d + 1)
    means = params.actions @ state.z
    best = int(np.argmax(means))
    out = StepOutcome(
        reward=float(means[action] + np.sqrt(params.noise_var) * noise[0]),
        best_mean=float(means[best]),
        best_action=best,
        chosen_mean=float(means[action]),
        action=int(action),
    )
    state.z = params.gamma @ state.z + params.q_chol @ noise[1:]
    state.t += 1
    return out


def instantaneous_regret(outcome):
    return outcome.best_mean - outcome.chosen_mean


def observability_gramian(params, action, tol=1e-12):
    """Solve ``O = Gamma' O Gamma + c c'`` for arm ``action``."""
    if not 0 <= action < params.k:
        raise BadActionIndex(f"action {action} outside [0, {params.k})")
    c = params.actions[action]
    return solve_discrete_lyapunov(params.gamma, np.outer(c, c), tol=tol)
