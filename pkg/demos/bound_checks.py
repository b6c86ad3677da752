"""Empirical coverage of the confidence bounds on a scalar system, and the
numeric regret bound on the benchmark."""
import math
import warnings

import numpy as np

from ubss.environment import make_rotation_lgds, make_scalar_lgds
from ubss.filters import DominanceWarning, make_modified_kalman
from ubss.harness import PolicySpec, _resolve_bounds, make_policy, ubss_config
from ubss.verification import (
    BoundInputs,
    check_model_error_bound,
    check_prediction_bound,
    default_ubss_config,
    estimate_xi_stats,
    evaluate_regret_bound,
)

rng = np.random.default_rng(1)
scalar = make_scalar_lgds()
cfg = default_ubss_config(scalar, s=1, delta=0.1)
reports = [check_model_error_bound(scalar, cfg, 100, rng)]
reports += list(check_prediction_bound(scalar, cfg, 100, rng))
for r in reports:
    print(f"{r.name:24s} coverage {r.empirical_level:.3f} (nominal {r.nominal_level:.2f})")

params = make_rotation_lgds(5 * math.pi / 8)
spec = _resolve_bounds(PolicySpec("UBSS", {"s": 1}), params)
ucfg = ubss_config(spec, params)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", DominanceWarning)
    mk = make_modified_kalman(params)
stats = estimate_xi_stats(params, lambda: make_policy(spec, params), 1, 2000, 2, rng)
bound = evaluate_regret_bound(
    BoundInputs(stats.sigma_xi, stats.mean_norm, 0.1, 10_000, 1, ucfg.lam, ucfg.b_c,
                ucfg.b_r, ucfg.b_g),
    params, mk,
)
print(f"B_R={ucfg.b_r:.3f}, B_G={ucfg.b_g:.3f}, B(delta)={bound.big_b:.4g}")
print(f"regret bound over 10^4 rounds: {bound.total:.4g}")
