"""One episode of every policy on the rotation benchmark.

All four policies face the same hidden-state trajectory, so their final
regrets are directly comparable.
"""
import math

from ubss.environment import make_rotation_lgds
from ubss.harness import _resolve_bounds, default_algorithms, episode_seeds, run_episode

theta = 5 * math.pi / 8
params = make_rotation_lgds(theta)
n, burn_in = 10_000, 10_000

for spec in default_algorithms():
    spec = _resolve_bounds(spec, params)
    env_seed, policy_seed = episode_seeds(0, 0, 0, spec.name)
    result = run_episode(params, spec, n, burn_in, env_seed, policy_seed)
    switches = int((result.actions[1:] != result.actions[:-1]).sum())
    print(f"{spec.name:7s} final regret {result.final_regret:12.1f}  arm switches {switches}")
    if spec.name == "UBSS":
        for (code, arm), entry in sorted(result.policy.entries.items()):
            print(f"    code {code} -> arm {arm}: n={entry.n}, g_hat={entry.g_hat.round(4)}")
