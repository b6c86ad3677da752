"""Restless bandits whose rewards come from a linear Gaussian state-space model.

Submodules
----------
numkernel     small dense linear algebra (Riccati, Lyapunov, Jacobi, ...)
environment   the hidden-state environment and the rotation benchmark
filters       Kalman and fixed-gain Kalman filters, ground-truth regressors
learner       the UBSS agent
baselines     UCB1, sliding-window UCB, random play
verification  empirical checks of the agent's confidence bounds
harness       seeded episodes, theta sweeps, diagnostics, CSV output
"""

__version__ = "0.1.0"
