"""A coarse version of the theta sweep, plus the diagnostic curves.

The full sweep is ``ubss sweep --theta-steps 64 --reps 20``; this script
uses 8 angles and 3 replications so it finishes in about a minute.
"""
from ubss.harness import ExperimentConfig, diagnostics_curves, theta_grid, theta_sweep

cfg = ExperimentConfig(theta_grid=theta_grid(8), n=2000, burn_in=2000, reps=3)
rows = theta_sweep(cfg)
diag = {round(r["theta"], 6): r for r in diagnostics_curves(cfg.theta_grid)}
print(f"{'theta':>6s} {'vs UCB %':>9s} {'vs SW %':>8s} {'vs Rand %':>9s} "
      f"{'min eig O':>10s} {'Re eig':>7s}")
for theta in cfg.theta_grid:
    pct = {r.algorithm: r.normalized_vs_ubss_pct for r in rows if r.theta == theta}
    d = diag[round(theta, 6)]
    print(f"{theta:6.3f} {pct['UCB']:9.2f} {pct['SW-UCB']:8.2f} {pct['Random']:9.2f} "
          f"{d['min_gramian_eig']:10.3g} {d['eig_real_part']:7.3f}")
