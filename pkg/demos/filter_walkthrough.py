"""Fixed-gain filtering on a small scalar system.

Builds the steady-state covariances of a two-arm scalar system, picks the
dominating one, and compares the optimal Kalman filter with the fixed-gain
filter on a simulated trajectory. Then shows that the dominance assumption
fails on the four-dimensional rotation benchmark.
"""
import math
import warnings

import numpy as np

from ubss.environment import make_rotation_lgds, make_scalar_lgds
from ubss.filters import (
    DominanceWarning,
    closed_loop,
    make_modified_kalman,
    steady_state_covariances,
    true_g,
)
from ubss.numkernel import is_schur_stable
from ubss.verification import kalman_vs_modified_mse

params = make_scalar_lgds(actions=(1.0, 0.5))
for a, p in enumerate(steady_state_covariances(params)):
    print(f"arm {a}: steady-state error variance {p[0, 0]:.6f}")

mk = make_modified_kalman(params)
print(f"dominating arm {mk.dominating_action}, gains {mk.gains.ravel().round(6)}")
for a in range(params.k):
    loop = closed_loop(params, mk, a)[0, 0]
    print(f"closed loop for arm {a}: {loop:.6f}")
for code in [(0,), (1,)]:
    print(f"regression vector for code {code}, arm 0: {true_g(params, mk, code, 0)}")

errs = kalman_vs_modified_mse(params, 20_000, np.random.default_rng(0)).mean(axis=0)
print(f"mean squared one-step error: Kalman {errs[0]:.4f}, fixed gain {errs[1]:.4f}, "
      f"no filter {errs[2]:.4f}")

print("\nrotation benchmark")
for theta in np.linspace(0, math.pi, 5):
    bench = make_rotation_lgds(theta)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DominanceWarning)
        mk = make_modified_kalman(bench)
    stable = [is_schur_stable(closed_loop(bench, mk, a)) for a in range(bench.k)]
    print(f"theta={theta:.3f}: dominating covariance {'no' if caught else 'yes'}, "
          f"closed loops stable {stable}")
