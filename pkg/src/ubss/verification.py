"""Empirical checks of the probabilistic guarantees behind the agent.

The guarantees are stated for population quantities (expected window norms,
second-moment matrices) and for arbitrary regression targets. Here they are
exercised on systems whose ground truth is computable: the target vectors
come from :func:`ubss.filters.true_g`, population moments are replaced by
Monte-Carlo estimates with standard errors, and every probabilistic claim is
checked one-sided with binomial slack.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .environment import (
    init_steady_state,
    stationary_covariance,
    step,
)
from .filters import (
    DominanceWarning,
    KalmanState,
    kalman_update,
    closed_loop,
    compute_p_bar,
    make_modified_kalman,
    modified_step,
    steady_state_covariances,
    true_g,
)
from .learner import RegressionEntry, UbssConfig, bonus_b, bonus_e, width
from .numkernel import is_schur_stable, spd_solve

__all__ = [
    "DomainWarning",
    "DegenerateDenominator",
    "CoverageReport",
    "CheckResult",
    "XiStats",
    "BoundInputs",
    "RegretBound",
    "benchmark_bounds",
    "binomial_slack",
    "xi_stats_from_rewards",
    "estimate_xi_stats",
    "model_error_norm",
    "check_model_error_bound",
    "check_prediction_bound",
    "compute_big_b",
    "evaluate_regret_bound",
    "check_lemma1_theorem1",
]


class DomainWarning(RuntimeWarning):
    """A logarithm argument fell below one and was clamped."""


class DegenerateDenominator(RuntimeWarning):
    """Two arms share a regression vector; the tail term is taken as zero."""


def binomial_slack(nominal, trials, sigmas=3.0):
    return sigmas * math.sqrt(nominal * (1.0 - nominal) / trials)


@dataclass
class CoverageReport:
    name: str
    trials: int
    violations: int
    nominal_level: float
    slack: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def empirical_level(self):
        return 1.0 - self.violations / self.trials

    @property
    def passed(self):
        return self.empirical_level >= self.nominal_level - self.slack

    def to_dict(self):
        return {
            "name": self.name,
            "trials": self.trials,
            "violations": self.violations,
            "nominal_level": self.nominal_level,
            "empirical_level": self.empirical_level,
            "slack": self.slack,
            "passed": self.passed,
            **self.extra,
        }


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float = float("nan")
    threshold: float = float("nan")
    detail: str = ""

    def to_dict(self):
        return asdict(self)


@dataclass
class XiStats:
    """Monte-Carlo moments of the reward window."""

    s: int
    sigma_xi: np.ndarray
    sigma_xi_se: np.ndarray
    mean_norm: float
    mean_norm_se: float
    samples: int


@dataclass
class BoundInputs:
    sigma_xi: np.ndarray
    mean_xi_norm: float
    delta: float
    n: int
    s: int
    lam: float
    b_c: float
    b_r: float
    b_g: float


@dataclass
class RegretBound:
    total: float
    warmup: float
    per_arm: np.ndarray
    big_b: float
    degenerate: list
    level_main: float
    level_appendix: float


def benchmark_bounds(params, s, mk=None):
    """Reward-scale and regression-norm bounds computed from the true system.

    ``b_r`` is the larger of ``sqrt(tr Z)`` (stationary state covariance)
    and ``sqrt(max_a c_a' P_bar c_a + noise_var)``; ``b_g`` is the largest
    ``||true_g||`` over every code of length ``s`` and every arm.
    """
    if mk is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DominanceWarning)
            mk = make_modified_kalman(params)
    z = stationary_covariance(params)
    resid = max(mk.residual_bound(params, a) for a in range(params.k))
    b_r = max(math.sqrt(np.trace(z)), math.sqrt(resid))
    b_g = max(
        float(np.linalg.norm(true_g(params, mk, code, a)))
        for code in itertools.product(range(params.k), repeat=s)
        for a in range(params.k)
    )
    return b_r, b_g


def _windows(rewards, s):
    r = np.asarray(rewards, float)
    if len(r) < s:
        return np.zeros((0, s))
    return np.lib.stride_tricks.sliding_window_view(r, s)


def xi_stats_from_rewards(rewards, s):
    """Moments of every length-``s`` window of one reward stream.

    Standard errors treat windows as independent, which understates them
    for autocorrelated streams; :func:`estimate_xi_stats` uses replication
    instead.
    """
    w = _windows(rewards, s)
    m = len(w)
    if m == 0:
        raise ValueError("stream shorter than the window")
    outer = np.einsum("ti,tj->tij", w, w)
    norms = np.linalg.norm(w, axis=1)
    if m > 1:
        outer_se = outer.std(axis=0, ddof=1) / math.sqrt(m)
        norm_se = float(norms.std(ddof=1) / math.sqrt(m))
    else:
        outer_se, norm_se = np.zeros((s, s)), 0.0
    return XiStats(s=s, sigma_xi=outer.mean(axis=0), sigma_xi_se=outer_se,
                   mean_norm=float(norms.mean()), mean_norm_se=norm_se, samples=m)


def estimate_xi_stats(params, policy_factory, s, rounds, reps, rng, burn_in=0,
                      stationary_start=True):
    """Replicated estimate of the window moments under a policy.

    ``policy_factory()`` must return an object with ``select(rng)`` and
    ``observe(action, reward)``. Each replication contributes one estimate;
    standard errors are across replications.
    """
    if rounds <= s:
        raise ValueError("rounds must exceed s")
    per_sigma, per_norm = [], []
    for _ in range(reps):
        env = init_steady_state(params, burn_in, rng, stationary=stationary_start)
        policy = policy_factory()
        rewards = np.empty(rounds)
        for t in range(rounds):
            a = policy.select(rng)
            out = step(env, params, a)
            policy.observe(a, out.reward)
            rewards[t] = out.reward
        st = xi_stats_from_rewards(rewards, s)
        per_sigma.append(st.sigma_xi)
        per_norm.append(st.mean_norm)
    per_sigma = np.array(per_sigma)
    per_norm = np.array(per_norm)
    se = (lambda x: x.std(axis=0, ddof=1) / math.sqrt(reps)) if reps > 1 else (
        lambda x: np.zeros_like(x[0]))
    return XiStats(
        s=s,
        sigma_xi=per_sigma.mean(axis=0),
        sigma_xi_se=se(per_sigma),
        mean_norm=float(per_norm.mean()),
        mean_norm_se=float(se(per_norm)),
        samples=reps * (rounds - s + 1),
    )


def model_error_norm(entry, g):
    """``||g_hat - g||_V`` with ``V`` the (regularised) Gram matrix."""
    diff = entry.g_hat - np.asarray(g, float)
    return math.sqrt(max(float(diff @ spd_solve(entry.v_inv, diff)), 0.0))


def _forced_trial(params, mk, code, action, samples, cfg, rng):
    """Collect ``samples`` regressions for one (code, arm) by cycling the
    schedule ``code + (action,)``; returns the entry, the window for the
    next prediction, and every window norm seen at sample times."""
    s = len(code)
    pattern = list(code) + [action]
    env = init_steady_state(params, 0, rng, stationary=True)
    entry = RegressionEntry.empty(s, cfg.lam)
    history = []
    norms = []
    t = 0
    while True:
        a = pattern[t % (s + 1)]
        if t % (s + 1) == s:
            xi = np.array(history[-s:])
            if entry.n == samples:
                return entry, xi, np.array(norms)
            out = step(env, params, a)
            entry.update(xi, out.reward)
            norms.append(float(np.linalg.norm(xi)))
        else:
            out = step(env, params, a)
        history.append(out.reward)
        t += 1


def _forcing_setup(params, cfg, code, action):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DominanceWarning)
        mk = make_modified_kalman(params)
    code = tuple(code) if code is not None else (0,) * cfg.s
    g = true_g(params, mk, code, action)
    return mk, code, g


def check_model_error_bound(params, cfg, trials, rng, samples=500, code=None, action=0):
    """Coverage of ``||g_hat - g||_V <= e + b`` under a forced schedule."""
    mk, code, g = _forcing_setup(params, cfg, code, action)
    violations = 0
    ratios = []
    for _ in range(trials):
        entry, _, _ = _forced_trial(params, mk, code, action, samples, cfg, rng)
        lhs = model_error_norm(entry, g)
        rhs = bonus_e(entry, cfg) + bonus_b(entry, cfg)
        ratios.append(lhs / rhs if rhs > 0 else math.inf)
        violations += lhs > rhs
    nominal = (1 - cfg.delta_e) * (1 - cfg.delta_b)
    return CoverageReport(
        "model_error_bound", trials, int(violations), nominal,
        binomial_slack(nominal, trials),
        extra={"max_ratio": float(np.max(ratios)), "median_ratio": float(np.median(ratios))},
    )


def check_prediction_bound(params, cfg, trials, rng, samples=500, code=None, action=0,
                           delta_big_b=None):
    """Coverage of the one-sided prediction bound, plus dominance of the
    looser closed-form bound ``B(delta | c)`` over the realised width.

    Returns two reports: the prediction-bound coverage and the ``B`` check.
    """
    mk, code, g = _forcing_setup(params, cfg, code, action)
    delta = cfg.delta_e if delta_big_b is None else delta_big_b
    violations = 0
    records = []
    for _ in range(trials):
        entry, xi, norms = _forced_trial(params, mk, code, action, samples, cfg, rng)
        err = float((entry.g_hat - g) @ xi)
        w = (bonus_e(entry, cfg) + bonus_b(entry, cfg)) * width(entry, xi)
        violations += err > w
        records.append((w, norms.mean()))
    nominal = (1 - cfg.delta_e) * (1 - cfg.delta_b)
    pred = CoverageReport(
        "prediction_bound", trials, int(violations), nominal, binomial_slack(nominal, trials)
    )
    widths = np.array([r[0] for r in records])
    mean_norm = float(np.mean([r[1] for r in records]))
    big_b = compute_big_b(BoundInputs(
        sigma_xi=np.zeros((cfg.s, cfg.s)), mean_xi_norm=mean_norm, delta=delta,
        n=samples + cfg.s, s=cfg.s, lam=cfg.lam, b_c=cfg.b_c, b_r=cfg.b_r, b_g=cfg.b_g,
    ))
    nominal_b = 1 - delta
    dom = CoverageReport(
        "big_b_dominates_width", trials, int(np.sum(widths > big_b)), nominal_b,
        binomial_slack(nominal_b, trials),
        extra={"big_b": big_b, "max_width": float(widths.max())},
    )
    return pred, dom


def compute_big_b(inputs):
    """Closed-form upper bound on the prediction width, three terms."""
    s, lam, n, dl = inputs.s, inputs.lam, inputs.n, inputs.delta
    if not 0 < dl < 1:
        raise ValueError("delta must lie in (0, 1)")
    m = inputs.mean_xi_norm
    if m == 0:
        return 0.0
    scaled = math.sqrt(s / lam) * m / dl
    log_arg = (
        math.log(1.0 / dl)
        + (s / 2) * math.log(s * lam + (n - s) * m / dl)
        - (s / 2) * math.log(lam)
    )
    if log_arg < 0:
        warnings.warn(f"log argument {math.exp(log_arg):.3g} < 1 clamped", DomainWarning)
        log_arg = 0.0
    noise = math.sqrt(2 * inputs.b_r**2 * log_arg) * scaled
    bias = math.sqrt(max(n - s, 0)) * inputs.b_c * inputs.b_r / dl * math.sqrt(s) * scaled
    ridge = lam * inputs.b_g * scaled
    return noise + bias + ridge


def evaluate_regret_bound(inputs, params, mk, delta=None):
    """Numeric value of the high-probability regret bound.

    The warm-up rounds are bounded by ``2 b_c b_r`` each. For each arm the
    miss probability is maximised over codes and over which arm is optimal,
    since the optimal arm changes from round to round.
    """
    delta = inputs.delta if delta is None else delta
    s, n, k = inputs.s, inputs.n, params.k
    big_b = compute_big_b(inputs)
    sigma = np.asarray(inputs.sigma_xi, float)
    degenerate = []
    per_arm = np.zeros(k)
    for a in range(k):
        worst = 0.0
        for code in itertools.product(range(k), repeat=s):
            ga = true_g(params, mk, code, a)
            for a_star in range(k):
                dg = true_g(params, mk, code, a_star) - ga
                quad = float(dg @ sigma @ dg)
                if quad <= 1e-15:
                    tail = 0.0
                    degenerate.append((code, a, a_star))
                else:
                    tail = math.exp(-4 * big_b**2 / (2 * quad))
                p = 1 - (1 - delta) ** 4 * (1 - tail)
                worst = max(worst, p)
        per_arm[a] = 2 * (n - s) * inputs.b_c**2 * inputs.b_r**2 * worst
    if any(c[1] != c[2] for c in degenerate):
        warnings.warn("distinct arms with equal regression vectors", DegenerateDenominator)
    warmup = s * 2 * inputs.b_c * inputs.b_r
    return RegretBound(
        total=float(warmup + per_arm.sum()),
        warmup=warmup,
        per_arm=per_arm,
        big_b=big_b,
        degenerate=degenerate,
        level_main=(1 - delta) ** 5,
        level_appendix=(1 - delta) ** 4,
    )


def check_lemma1_theorem1(params, rng, sequences=100, steps=1000, tol=1e-6):
    """Matrix facts behind the fixed-gain filter along random arm sequences.

    Checks: a dominating steady-state covariance exists; every closed loop
    is Schur stable; ``P_bar - P'_t`` stays PSD (to ``-tol``); the residual
    variance never exceeds ``c' P_bar c + noise_var``. The sequences are
    propagated as one batch; the PSD margin uses LAPACK's symmetric
    eigensolver.
    """
    ps = steady_state_covariances(params)
    try:
        compute_p_bar(params, covariances=ps)
        dominated = True
    except ArithmeticError:
        dominated = False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DominanceWarning)
        mk = make_modified_kalman(params)
    results = [CheckResult("dominating_covariance_exists", dominated,
                           detail=f"P_bar from arm {mk.dominating_action}")]
    stable = [is_schur_stable(closed_loop(params, mk, a)) for a in range(params.k)]
    results.append(CheckResult("closed_loop_stable", all(stable), detail=str(stable)))

    loops = np.array([closed_loop(params, mk, a) for a in range(params.k)])
    gl = np.array([params.gamma @ mk.gains[a] for a in range(params.k)])
    drive = params.q + params.noise_var * np.einsum("ai,aj->aij", gl, gl)
    bounds = np.array([mk.residual_bound(params, a) for a in range(params.k)])
    p = np.broadcast_to(mk.p_bar, (sequences,) + mk.p_bar.shape).copy()
    worst_margin = np.inf
    worst_excess = -np.inf
    for _ in range(steps):
        acts = rng.integers(params.k, size=sequences)
        c = params.actions[acts]
        resid = np.einsum("bi,bij,bj->b", c, p, c) + params.noise_var
        worst_excess = max(worst_excess, float(np.max(resid - bounds[acts])))
        a = loops[acts]
        p = a @ p @ np.swapaxes(a, 1, 2) + drive[acts]
        p = 0.5 * (p + np.swapaxes(p, 1, 2))
        margin = np.linalg.eigvalsh(mk.p_bar - p)[:, 0].min()
        worst_margin = min(worst_margin, float(margin))
    results.append(CheckResult("psd_order_along_sequences", worst_margin >= -tol, worst_margin, -tol))
    results.append(CheckResult("residual_variance_cap", worst_excess <= 1e-9,
                               worst_excess, 1e-9))
    return results


def kalman_vs_modified_mse(params, steps, rng, action_probs=None):
    """One-step squared prediction errors of the optimal and fixed-gain
    filters on one simulated trajectory with random arms."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DominanceWarning)
        mk = make_modified_kalman(params)
    env = init_steady_state(params, 0, rng, stationary=True)
    kf = KalmanState(z_hat=np.zeros(params.d), p=stationary_covariance(params))
    errs = np.zeros((steps, 3))
    for t in range(steps):
        a = int(rng.choice(params.k, p=action_probs))
        out = step(env, params, a)
        kf, pk = kalman_update(kf, params, a, out.reward)
        mk, pm, _ = modified_step(mk, params, a, out.reward)
        errs[t] = ((out.reward - pk) ** 2, (out.reward - pm) ** 2, out.reward**2)
    return errs


def default_ubss_config(params, s=1, lam=1.0, delta=0.1, **kw):
    b_r, b_g = benchmark_bounds(params, s)
    return UbssConfig(s=s, lam=lam, delta_e=delta, delta_b=delta, b_r=b_r, b_g=b_g,
                      b_c=params.b_c, **kw)
