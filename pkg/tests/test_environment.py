import math

import numpy as np
import pytest

from ubss.environment import (
    BadActionIndex,
    EnvState,
    LgdsParams,
    StepOutcome,
    init_steady_state,
    instantaneous_regret,
    make_rotation_lgds,
    make_scalar_lgds,
    observability_gramian,
    stationary_covariance,
    step,
)
from ubss.numkernel import DimensionMismatch


def test_rotation_at_zero():
    p = make_rotation_lgds(0.0)
    expected = [[0.9, 0, 1, 0], [0, 0.9, 0, 1], [0, 0, 0.9, 0], [0, 0, 0, 0.9]]
    np.testing.assert_allclose(p.gamma, expected, atol=1e-15)


def test_rotation_quarter_turn_block():
    p = make_rotation_lgds(math.pi / 2)
    np.testing.assert_allclose(p.gamma[:2, :2], [[0, 0.9], [-0.9, 0]], atol=1e-15)


@pytest.mark.parametrize("theta", np.linspace(0, 2 * math.pi, 7))
def test_rotation_arm_norms(theta):
    p = make_rotation_lgds(theta)
    np.testing.assert_allclose(np.linalg.norm(p.actions, axis=1), [10.0, 10.0])
    assert p.b_c == 10.0 and p.k == 2 and p.d == 4


def test_params_validation():
    with pytest.raises(DimensionMismatch):
        LgdsParams(gamma=np.eye(2), q=np.eye(3), noise_var=1.0, actions=[[1.0, 0.0]])
    with pytest.raises(ValueError):
        LgdsParams(gamma=np.eye(1) * 0.5, q=np.eye(1), noise_var=0.0, actions=[[1.0]])
    with pytest.raises(ValueError):
        LgdsParams(gamma=np.eye(1) * 0.5, q=-np.eye(1), noise_var=1.0, actions=[[1.0]])
    with pytest.raises(ValueError):
        LgdsParams(gamma=np.eye(1) * 0.5, q=np.eye(1), noise_var=1.0, actions=[[3.0]], b_c=1.0)
    with pytest.warns(RuntimeWarning):
        LgdsParams(gamma=np.eye(1) * 1.2, q=np.eye(1), noise_var=1.0, actions=[[1.0]])


def test_params_are_immutable():
    p = make_rotation_lgds(1.0)
    with pytest.raises(ValueError):
        p.gamma[0, 0] = 3.0
    with pytest.raises(AttributeError):
        p.noise_var = 2.0


def test_json_round_trip(tmp_path):
    p = make_rotation_lgds(0.7)
    path = tmp_path / "sys.json"
    p.to_json(path)
    for q in (LgdsParams.from_json(path), LgdsParams.from_json(p.to_json())):
        np.testing.assert_array_equal(q.gamma, p.gamma)
        np.testing.assert_array_equal(q.actions, p.actions)
        assert q.noise_var == p.noise_var and q.b_c == p.b_c


def test_burn_in_zero_is_origin(rng):
    p = make_rotation_lgds(1.0)
    assert np.array_equal(init_steady_state(p, 0, rng).z, np.zeros(4))
    with pytest.raises(ValueError):
        init_steady_state(p, -1, rng)


def test_burn_in_deterministic():
    p = make_rotation_lgds(1.0)
    a = init_steady_state(p, 50, np.random.default_rng(4)).z
    b = init_steady_state(p, 50, np.random.default_rng(4)).z
    np.testing.assert_array_equal(a, b)


def test_burn_in_reaches_stationary_law():
    p = make_rotation_lgds(math.pi / 4)
    z = np.array([
        init_steady_state(p, 10_000, np.random.default_rng(seed)).z for seed in range(100)
    ])
    target = np.diag(stationary_covariance(p))
    # 100 draws give a relative sampling error near sqrt(2/100) = 14%, so
    # a 15% band at one draw would be a coin flip; pool 4 x 100 seeds
    z = np.vstack([z] + [
        np.array([init_steady_state(p, 2_000, np.random.default_rng(1000 * k + s)).z
                  for s in range(100)])
        for k in range(1, 4)
    ])
    np.testing.assert_allclose(z.var(axis=0), target, rtol=0.15)


def test_stationary_covariance_fixed_point():
    p = make_rotation_lgds(2.0)
    z = stationary_covariance(p)
    np.testing.assert_allclose(z, p.gamma @ z @ p.gamma.T + p.q, atol=1e-8 * np.abs(z).max())


def test_step_noise_free_reward():
    p = LgdsParams(gamma=make_rotation_lgds(0.3).gamma, q=np.eye(4), noise_var=1e-300,
                   actions=make_rotation_lgds(0.3).actions)
    st = EnvState(z=np.array([1.0, 0, 0, 0]), rng=np.random.default_rng(0))
    assert step(st, p, 0).reward == pytest.approx(10.0, abs=1e-12)


def test_step_means_and_best():
    p = make_rotation_lgds(0.3)
    st = EnvState(z=np.array([1.0, 2.0, 0, 0]), rng=np.random.default_rng(0))
    out = step(st, p, 0)
    assert out.best_mean == 20.0 and out.best_action == 1 and out.chosen_mean == 10.0
    assert instantaneous_regret(out) == 10.0
    assert st.t == 1


def test_step_rejects_bad_action(rng):
    p = make_rotation_lgds(0.3)
    with pytest.raises(BadActionIndex):
        step(EnvState(np.zeros(4), rng), p, 2)
    with pytest.raises(BadActionIndex):
        step(EnvState(np.zeros(4), rng), p, -1)


def test_step_trajectory_independent_of_action():
    p = make_rotation_lgds(1.1)
    a = EnvState(np.ones(4), np.random.default_rng(9))
    b = EnvState(np.ones(4), np.random.default_rng(9))
    for t in range(20):
        step(a, p, 0)
        step(b, p, t % 2)
    np.testing.assert_array_equal(a.z, b.z)


def test_regret_zero_when_best():
    o = StepOutcome(reward=1.0, best_mean=3.0, best_action=0, chosen_mean=3.0, action=0)
    assert instantaneous_regret(o) == 0.0


def test_gramian_examples():
    zero = LgdsParams(gamma=np.zeros((2, 2)), q=np.eye(2), noise_var=1.0,
                      actions=[[1.0, 2.0]])
    np.testing.assert_allclose(observability_gramian(zero, 0), [[1, 2], [2, 4]])
    o = observability_gramian(make_scalar_lgds(), 0)
    assert o[0, 0] == pytest.approx(4 / 3, abs=1e-12)
    p = make_rotation_lgds(0.0)
    o = observability_gramian(p, 0)
    c = p.actions[0]
    assert np.abs(o - p.gamma.T @ o @ p.gamma - np.outer(c, c)).max() <= 1e-8
