"""Kalman filtering for the bandit environment.

Two predictors live here: the ordinary time-varying Kalman filter and the
fixed-gain variant whose gains are all built from one dominating
steady-state covariance. The fixed-gain filter is what the learner
implicitly identifies, so this module also produces the ground-truth
regression vectors used to test the learner.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .environment import BadActionIndex
from .numkernel import (
    min_eig_sym,
    psd_geq,
    riccati_step,
    spectral_norm,
    steady_state_riccati,
    symmetrize,
)

__all__ = [
    "NoDominatingCovariance",
    "DominanceWarning",
    "KalmanState",
    "ModifiedKalman",
    "kalman_update",
    "steady_state_covariances",
    "compute_p_bar",
    "make_modified_kalman",
    "modified_step",
    "closed_loop",
    "true_g",
    "true_beta_decay",
]


class NoDominatingCovariance(ArithmeticError):
    """No per-arm steady-state covariance dominates all others."""

    def __init__(self, message, covariances=None):
        super().__init__(message)
        self.covariances = covariances


class DominanceWarning(RuntimeWarning):
    pass


def _check_action(params, action):
    if not 0 <= action < params.k:
        raise BadActionIndex(f"action {action} outside [0, {params.k})")


@dataclass
class KalmanState:
    z_hat: np.ndarray
    p: np.ndarray


def kalman_update(state, params, action, reward):
    """Predict the reward of ``action`` then fold in the observed ``reward``.

    Returns the updated state and the prediction made before the update.
    """
    _check_action(params, action)
    c = params.actions[action]
    gamma = params.gamma
    prediction = float(c @ state.z_hat)
    pc = state.p @ c
    gain = pc / (c @ pc + params.noise_var)
    z_hat = gamma @ state.z_hat + gamma @ gain * (reward - prediction)
    p = riccati_step(state.p, c, gamma, params.q, params.noise_var)
    return KalmanState(z_hat=z_hat, p=p), prediction


def steady_state_covariances(params, tol=1e-10, max_iter=1_000_000):
    return [
        steady_state_riccati(params.gamma, params.q, c, params.noise_var, tol, max_iter)
        for c in params.actions
    ]


def compute_p_bar(params, tol=1e-8, covariances=None):
    """Find an arm whose steady-state covariance dominates every other arm's.

    Returns
    -------
    (index, P) : tuple
        The first dominating arm in index order and its covariance.

    Raises
    ------
    NoDominatingCovariance
        When no such arm exists.
    """
    ps = covariances if covariances is not None else steady_state_covariances(params)
    for a, pa in enumerate(ps):
        if all(psd_geq(pa, pb, tol) for b, pb in enumerate(ps) if b != a):
            return a, pa
    raise NoDominatingCovariance(
        "no arm's steady-state covariance dominates the others", covariances=ps
    )


@dataclass
class ModifiedKalman:
    """Fixed-gain filter state.

    ``gains[a] = P_bar c_a / (c_a' P_bar c_a + noise_var)``. ``p_prime`` is
    the error covariance of ``z_hat`` under the realised action sequence.
    """

    p_bar: np.ndarray
    gains: np.ndarray
    z_hat: np.ndarray
    p_prime: np.ndarray
    dominating_action: int
    dominance_holds: bool = True

    def residual_bound(self, params, action):
        c = params.actions[action]
        return float(c @ self.p_bar @ c + params.noise_var)


def make_modified_kalman(params, fallback=True, z_hat=None):
    """Build the fixed-gain filter, starting ``p_prime`` at ``P_bar``.

    When no arm dominates and ``fallback`` is set, the arm whose covariance
    has the largest trace is used and a :class:`DominanceWarning` is issued;
    ``dominance_holds`` is then False.
    """
    ps = steady_state_covariances(params)
    holds = True
    try:
        a_bar, p_bar = compute_p_bar(params, covariances=ps)
    except NoDominatingCovariance:
        if not fallback:
            raise
        a_bar = int(np.argmax([np.trace(p) for p in ps]))
        p_bar = ps[a_bar]
        holds = False
        warnings.warn(
            f"no dominating steady-state covariance; using arm {a_bar} "
            "(largest trace)",
            DominanceWarning,
            stacklevel=2,
        )
    pc = params.actions @ p_bar
    gains = pc / (np.einsum("ij,ij->i", pc, params.actions) + params.noise_var)[:, None]
    return ModifiedKalman(
        p_bar=p_bar,
        gains=gains,
        z_hat=np.zeros(params.d) if z_hat is None else np.asarray(z_hat, float),
        p_prime=p_bar.copy(),
        dominating_action=a_bar,
        dominance_holds=holds,
    )


def closed_loop(params, mk, action):
    """``Gamma - Gamma L_a c_a'``."""
    _check_action(params, action)
    g = params.gamma
    return g - np.outer(g @ mk.gains[action], params.actions[action])


def modified_step(mk, params, action, reward):
    """Advance the fixed-gain filter by one observed round.

    Returns ``(mk, prediction, residual_var)`` where ``residual_var`` is the
    variance of ``reward - prediction`` implied by the current ``p_prime``.
    """
    _check_action(params, action)
    c = params.actions[action]
    gain = mk.gains[action]
    prediction = float(c @ mk.z_hat)
    residual_var = float(c @ mk.p_prime @ c + params.noise_var)
    g = params.gamma
    gl = g @ gain
    a = g - np.outer(gl, c)
    mk.z_hat = g @ mk.z_hat + gl * (reward - prediction)
    mk.p_prime = symmetrize(
        a @ mk.p_prime @ a.T + params.q + params.noise_var * np.outer(gl, gl)
    )
    return mk, prediction, residual_var


def true_g(params, mk, code, action):
    """Exact regression vector of arm ``action`` given the window ``code``.

    ``code`` lists the arms pulled in the last ``s`` rounds, oldest first.
    Entry ``j`` weights the reward observed under ``code[j]``.
    """
    _check_action(params, action)
    s = len(code)
    out = np.zeros(s)
    row = params.actions[action].copy()
    g = params.gamma
    for j in range(s - 1, -1, -1):
        out[j] = row @ g @ mk.gains[code[j]]
        row = row @ closed_loop(params, mk, code[j])
    return out


def true_beta_decay(params, mk, code):
    """Spectral norm of the product of closed loops along ``code``.

    Bounds how strongly the state estimate from before the window leaks
    into the prediction; an empty code gives 1.
    """
    m = np.eye(params.d)
    for a in reversed(code):
        m = m @ closed_loop(params, mk, a)
    return spectral_norm(m)


def dominance_margin(mk):
    """Smallest eigenvalue of ``P_bar - p_prime``."""
    return min_eig_sym(symmetrize(mk.p_bar - mk.p_prime))
