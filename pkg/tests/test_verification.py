import math
import warnings

import numpy as np
import pytest

from ubss.baselines import RandomPolicy
from ubss.environment import LgdsParams, make_rotation_lgds, make_scalar_lgds
from ubss.filters import DominanceWarning, make_modified_kalman
from ubss.learner import RegressionEntry, UbssConfig
from ubss.verification import (
    BoundInputs,
    CoverageReport,
    DegenerateDenominator,
    DomainWarning,
    benchmark_bounds,
    binomial_slack,
    check_lemma1_theorem1,
    check_model_error_bound,
    check_prediction_bound,
    compute_big_b,
    default_ubss_config,
    estimate_xi_stats,
    evaluate_regret_bound,
    model_error_norm,
    xi_stats_from_rewards,
)


def inputs(**kw):
    base = dict(sigma_xi=np.eye(1), mean_xi_norm=1.0, delta=0.5, n=2, s=1, lam=1.0,
                b_c=1.0, b_r=1.0, b_g=1.0)
    return BoundInputs(**{**base, **kw})


def test_binomial_slack():
    assert binomial_slack(0.81, 400) == pytest.approx(3 * math.sqrt(0.81 * 0.19 / 400))


def test_coverage_report_levels():
    r = CoverageReport("x", trials=400, violations=40, nominal_level=0.81, slack=0.05)
    assert r.empirical_level == pytest.approx(0.9) and r.passed
    assert not CoverageReport("x", 100, 50, 0.81, 0.05).passed
    assert r.to_dict()["empirical_level"] == pytest.approx(0.9)


def test_big_b_hand_example():
    # 2 sqrt(2 ln(2 sqrt 3)) + 6; the three terms carry sqrt(s/lam) E|Xi| / delta = 2
    expected = 2 * math.sqrt(2 * math.log(2 * math.sqrt(3))) + 6
    assert compute_big_b(inputs()) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(9.1527, abs=1e-4)


def test_big_b_zero_norm_and_monotone():
    assert compute_big_b(inputs(mean_xi_norm=0.0)) == 0.0
    vals = [compute_big_b(inputs(n=n)) for n in (2, 5, 50, 500, 5000)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        compute_big_b(inputs(delta=1.0))


def test_big_b_log_argument_exceeds_one():
    # (s lam + ...)^(s/2) / lam^(s/2) >= s^(s/2) >= 1 and 1/delta > 1, so the
    # clamp is defensive only
    with warnings.catch_warnings():
        warnings.simplefilter("error", DomainWarning)
        val = compute_big_b(inputs(lam=100.0, delta=0.99, mean_xi_norm=1e-6))
    assert val > 0


def test_regret_bound_delta_to_one():
    p = make_scalar_lgds(actions=(1.0, 0.5))
    mk = make_modified_kalman(p)
    bound = evaluate_regret_bound(inputs(n=100, delta=1 - 1e-12), p, mk)
    limit = 2 * 1 * 1 + 2 * 2 * (100 - 1)
    assert bound.total == pytest.approx(limit, rel=1e-9)
    assert bound.level_main < bound.level_appendix < 1e-40


def test_regret_bound_identical_arms():
    p = LgdsParams(gamma=[[0.5]], q=[[1.0]], noise_var=1.0, actions=[[1.0], [1.0]])
    mk = make_modified_kalman(p)
    with pytest.warns(DegenerateDenominator):
        bound = evaluate_regret_bound(inputs(n=100, delta=0.1), p, mk)
    # with no tail term each arm contributes 2(n - s)(1 - 0.9^4)
    per_arm = 2 * 99 * (1 - 0.9**4)
    np.testing.assert_allclose(bound.per_arm, [per_arm, per_arm])
    assert bound.degenerate


def test_xi_stats_zero_stream():
    st = xi_stats_from_rewards(np.zeros(50), 2)
    np.testing.assert_array_equal(st.sigma_xi, np.zeros((2, 2)))
    assert st.mean_norm == 0.0


def test_xi_stats_iid_stream(rng):
    r = rng.standard_normal(40_000)
    st = xi_stats_from_rewards(r, 2)
    assert np.all(np.abs(st.sigma_xi - np.eye(2)) <= 3 * st.sigma_xi_se + 1e-12)


def test_estimate_xi_stats_replicates(rng):
    p = make_scalar_lgds(actions=(1.0, 0.5))
    a = estimate_xi_stats(p, lambda: RandomPolicy(2), 1, rounds=2000, reps=8, rng=rng)
    b = estimate_xi_stats(p, lambda: RandomPolicy(2), 1, rounds=2000, reps=8, rng=rng)
    se = math.hypot(a.mean_norm_se, b.mean_norm_se)
    assert abs(a.mean_norm - b.mean_norm) <= 4 * se
    assert a.samples == 8 * 2000


def test_model_error_norm_exact():
    e = RegressionEntry.empty(2, 1.0)
    for x in ([1.0, 0.0], [0.0, 2.0], [1.0, 1.0]):
        e.update(np.array(x), float(np.dot(x, [0.3, -0.1])))
    diff = e.g_hat - [0.3, -0.1]
    V = np.linalg.inv(e.v_inv)
    assert model_error_norm(e, [0.3, -0.1]) == pytest.approx(math.sqrt(diff @ V @ diff))
    assert model_error_norm(e, e.g_hat) == 0.0


def test_exact_recovery_has_no_violations(rng):
    # nearly noiseless system: g_hat matches g up to the tiny ridge bias
    p = make_scalar_lgds(q=1.0, noise_var=1e-10)
    cfg = default_ubss_config(p, s=1, lam=1e-9, delta=0.1)
    rep = check_model_error_bound(p, cfg, 20, rng, samples=200)
    assert rep.violations == 0


def test_coverage_small_run(rng):
    p = make_scalar_lgds()
    cfg = default_ubss_config(p, s=1, delta=0.1)
    rep = check_model_error_bound(p, cfg, 40, rng, samples=200)
    pred, dom = check_prediction_bound(p, cfg, 40, rng, samples=200)
    assert rep.nominal_level == pytest.approx(0.81)
    for r in (rep, pred, dom):
        assert r.passed


def test_benchmark_bounds_scalar(scalar):
    b_r, b_g = benchmark_bounds(scalar, 1)
    assert b_r == pytest.approx(math.sqrt(max(4 / 3, 1.1327823 + 1)), rel=1e-6)
    assert b_g == pytest.approx(0.2655644, abs=1e-7)


def test_filter_checks_pass_on_scalar_systems(rng):
    res = check_lemma1_theorem1(make_scalar_lgds(actions=(1.0, 0.5)), rng, sequences=20,
                                steps=300)
    assert all(r.passed for r in res), [r.to_dict() for r in res]
    res = check_lemma1_theorem1(make_scalar_lgds(), rng, sequences=5, steps=100)
    assert all(r.passed for r in res)


def test_filter_checks_report_missing_dominance(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DominanceWarning)
        res = {r.name: r for r in check_lemma1_theorem1(make_rotation_lgds(0.0), rng,
                                                          sequences=5, steps=50)}
    assert not res["dominating_covariance_exists"].passed
    assert res["closed_loop_stable"].passed
