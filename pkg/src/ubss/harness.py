"""Experiment orchestration: seeded episodes, theta sweeps, diagnostics.

Seeding is keyed by indices, never by scheduling order. The environment
stream of an episode depends only on ``(master_seed, theta_index, rep)``, so
every algorithm (and every window length) faces the same hidden-state
trajectory for a given replication; each policy additionally gets its own
stream keyed by its name.
"""
from __future__ import annotations

import csv
import json
import math
import subprocess
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import RandomPolicy, SlidingWindowUCB, UCB1
from .environment import (
    LgdsParams,
    init_steady_state,
    make_rotation_lgds,
    observability_gramian,
    step,
)
from .learner import UbssAgent, UbssConfig
from .numkernel import min_eig_sym
from .verification import benchmark_bounds

__all__ = [
    "ConfigError",
    "PolicySpec",
    "ExperimentConfig",
    "EpisodeResult",
    "SweepRow",
    "episode_seeds",
    "make_policy",
    "run_episode",
    "final_regrets",
    "theta_sweep",
    "s_comparison",
    "diagnostics_curves",
    "write_sweep_csv",
    "write_diagnostics_csv",
    "write_metadata",
    "write_episode_csv",
    "theta_grid",
    "normalized_pct",
    "default_algorithms",
    "ubss_config",
    "version_string",
    "verification_suite",
]

ALGORITHMS = ("UBSS", "UCB", "SW-UCB", "Random")
_ALIASES = {a.lower(): a for a in ALGORITHMS} | {"swucb": "SW-UCB", "sw_ucb": "SW-UCB"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    """A policy name plus its hyperparameters.

    UBSS accepts ``s``, ``lam``, ``delta`` (or ``delta_e``/``delta_b``),
    ``b_r``, ``b_g``, ``force_explore_unseen``; missing ``b_r``/``b_g`` are
    computed from the true system. UCB accepts ``alpha``; SW-UCB accepts
    ``tau``, ``xi_exp``, ``b_scale``.
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        name = _ALIASES.get(str(self.name).lower())
        if name is None:
            raise ConfigError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def s(self):
        return int(self.params.get("s", 1)) if self.name == "UBSS" else None

    @property
    def label(self):
        return self.name

    def with_params(self, **kw):
        return PolicySpec(self.name, {**self.params, **kw})

    def to_dict(self):
        return {"name": self.name, "params": self.params}


def default_algorithms():
    return [
        PolicySpec("UBSS", {"s": 1, "lam": 1.0, "delta": 0.1}),
        PolicySpec("UCB", {"alpha": 1.0}),
        PolicySpec("SW-UCB", {"tau": 500, "xi_exp": 0.6, "b_scale": None}),
        PolicySpec("Random"),
    ]


def ubss_config(spec, params):
    p = spec.params
    s = int(p.get("s", 1))
    delta = p.get("delta", 0.1)
    b_r, b_g = p.get("b_r"), p.get("b_g")
    if b_r is None or b_g is None:
        auto_r, auto_g = benchmark_bounds(params, s)
        b_r = auto_r if b_r is None else b_r
        b_g = auto_g if b_g is None else b_g
    return UbssConfig(
        s=s,
        lam=float(p.get("lam", 1.0)),
        delta_e=float(p.get("delta_e", delta)),
        delta_b=float(p.get("delta_b", delta)),
        b_r=float(b_r),
        b_g=float(b_g),
        b_c=float(p.get("b_c", params.b_c)),
        force_explore_unseen=bool(p.get("force_explore_unseen", True)),
    )


def make_policy(spec, params):
    k = params.k
    p = spec.params
    if spec.name == "UBSS":
        return UbssAgent(k, ubss_config(spec, params))
    if spec.name == "UCB":
        return UCB1(k, alpha=float(p.get("alpha", 1.0)))
    if spec.name == "SW-UCB":
        tau = p.get("tau", 500)
        return SlidingWindowUCB(
            k,
            tau=None if tau in (None, "inf", math.inf) else int(tau),
            xi_exp=float(p.get("xi_exp", 0.6)),
            b_scale=p.get("b_scale"),
        )
    return RandomPolicy(k)


def _algo_key(name):
    return zlib.crc32(name.encode())


def episode_seeds(master_seed, theta_index, rep, algorithm):
    """``(env_seed, policy_seed)`` as :class:`numpy.random.SeedSequence`."""
    env = np.random.SeedSequence(master_seed, spawn_key=(theta_index, rep))
    pol = np.random.SeedSequence(
        master_seed, spawn_key=(theta_index, rep, _algo_key(algorithm))
    )
    return env, pol


@dataclass
class EpisodeResult:
    """Per-round log of one episode; ``cum_regret`` is nondecreasing."""

    actions: np.ndarray
    rewards: np.ndarray
    best_actions: np.ndarray
    best_means: np.ndarray
    chosen_means: np.ndarray
    states: np.ndarray
    policy: object = None

    @property
    def regret(self):
        return self.best_means - self.chosen_means

    @property
    def cum_regret(self):
        return np.cumsum(self.regret)

    @property
    def final_regret(self):
        return float(self.regret.sum())


def run_episode(params, spec, n, burn_in, env_seed, policy_seed=None, stationary_start=False):
    """Run one learner for ``n`` rounds after a burn-in of the hidden state.

    Seeds may be ints or :class:`numpy.random.SeedSequence`. When
    ``policy_seed`` is omitted it is derived from ``env_seed``.
    """
    if not isinstance(env_seed, np.random.SeedSequence):
        env_seed = np.random.SeedSequence(env_seed)
    if policy_seed is None:
        policy_seed = np.random.SeedSequence(
            env_seed.entropy, spawn_key=env_seed.spawn_key + (_algo_key(spec.name),)
        )
    elif not isinstance(policy_seed, np.random.SeedSequence):
        policy_seed = np.random.SeedSequence(policy_seed)
    env_rng = np.random.default_rng(env_seed)
    pol_rng = np.random.default_rng(policy_seed)
    env = init_steady_state(params, burn_in, env_rng, stationary=stationary_start)
    policy = make_policy(spec, params)
    actions = np.empty(n, dtype=int)
    best_actions = np.empty(n, dtype=int)
    rewards = np.empty(n)
    best = np.empty(n)
    chosen = np.empty(n)
    states = np.empty((n, params.d))
    for t in range(n):
        states[t] = env.z
        a = policy.select(pol_rng)
        out = step(env, params, a)
        policy.observe(a, out.reward)
        actions[t] = a
        rewards[t] = out.reward
        best[t] = out.best_mean
        chosen[t] = out.chosen_mean
        best_actions[t] = out.best_action
    return EpisodeResult(actions, rewards, best_actions, best, chosen, states, policy)


@dataclass
class ExperimentConfig:
    theta_grid: list = field(default_factory=lambda: theta_grid(64))
    n: int = 10_000
    burn_in: int = 10_000
    reps: int = 20
    master_seed: int = 0
    algorithms: list = field(default_factory=default_algorithms)
    s_values: list = field(default_factory=lambda: [1])
    workers: int = 1
    normalize_denominator: str = "comparison"
    system: dict | None = None

    def __post_init__(self):
        self.algorithms = [
            a if isinstance(a, PolicySpec) else PolicySpec(a["name"], a.get("params", {}))
            for a in self.algorithms
        ]
        self.validate()

    def validate(self):
        if not self.theta_grid:
            raise ConfigError("theta_grid is empty")
        for th in self.theta_grid:
            if not 0 <= th <= 2 * math.pi + 1e-12:
                raise ConfigError(f"theta {th} outside [0, 2pi]")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be non-negative")
        if not self.s_values or min(self.s_values) < 1:
            raise ConfigError("s_values must be positive integers")
        s_max = max([*self.s_values, *(a.s for a in self.algorithms if a.s)])
        if self.n <= s_max:
            raise ConfigError(f"n={self.n} must exceed the largest window s={s_max}")
        if self.normalize_denominator not in ("comparison", "ubss"):
            raise ConfigError("normalize_denominator must be 'comparison' or 'ubss'")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for a in self.algorithms:
            if a.name == "UBSS":
                p = a.params
                try:
                    UbssConfig(
                        s=int(p.get("s", 1)), lam=float(p.get("lam", 1.0)),
                        delta_e=float(p.get("delta_e", p.get("delta", 0.1))),
                        delta_b=float(p.get("delta_b", p.get("delta", 0.1))),
                    )
                except ValueError as exc:
                    raise ConfigError(f"UBSS: {exc}") from exc

    def params_for(self, theta):
        if self.system is not None:
            return LgdsParams.from_dict(self.system)
        return make_rotation_lgds(theta)

    def to_dict(self):
        d = asdict(self)
        d["algorithms"] = [a.to_dict() for a in self.algorithms]
        return d

    @classmethod
    def from_dict(cls, doc):
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known - {"theta_steps"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        doc = dict(doc)
        if "theta_steps" in doc:
            doc.setdefault("theta_grid", theta_grid(int(doc.pop("theta_steps"))))
        try:
            return cls(**doc)
        except (TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
        return cls.from_dict(doc)


def theta_grid(steps):
    if steps < 1:
        raise ConfigError("theta_steps must be positive")
    return [float(x) for x in np.linspace(0.0, 2 * math.pi, steps, endpoint=False)]


@dataclass
class SweepRow:
    theta: float
    algorithm: str
    s: int | None
    mean_regret: float
    std_err: float
    normalized_vs_ubss_pct: float | None


def _episode_task(args):
    params_doc, spec_doc, n, burn_in, master_seed, theta_index, rep = args
    params = LgdsParams.from_dict(params_doc)
    spec = PolicySpec(spec_doc["name"], spec_doc["params"])
    env_seed, pol_seed = episode_seeds(master_seed, theta_index, rep, spec.name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_episode(params, spec, n, burn_in, env_seed, pol_seed).final_regret


def _resolve_bounds(spec, params):
    """Freeze system-derived UBSS bounds once per system, not per episode."""
    if spec.name != "UBSS":
        return spec
    cfg = ubss_config(spec, params)
    return spec.with_params(b_r=cfg.b_r, b_g=cfg.b_g)


def final_regrets(cfg, specs=None, thetas=None):
    """Final cumulative regret for every (theta, spec, rep).

    Returns a dict ``{(theta_index, spec_index): array of length reps}``.
    Results do not depend on ``cfg.workers``.
    """
    specs = cfg.algorithms if specs is None else specs
    thetas = cfg.theta_grid if thetas is None else thetas
    tasks, keys = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, th in enumerate(thetas):
            params = cfg.params_for(th)
            pdoc = params.to_dict()
            for j, spec in enumerate(specs):
                resolved = _resolve_bounds(spec, params).to_dict()
                for r in range(cfg.reps):
                    tasks.append((pdoc, resolved, cfg.n, cfg.burn_in, cfg.master_seed, i, r))
                    keys.append((i, j))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            finals = list(pool.map(_episode_task, tasks, chunksize=1))
    else:
        finals = [_episode_task(t) for t in tasks]
    out = {}
    for key, value in zip(keys, finals):
        out.setdefault(key, []).append(value)
    return {k: np.array(v) for k, v in out.items()}


def _mean_se(x):
    x = np.asarray(x, float)
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


def normalized_pct(r_alg, r_ubss, denominator="comparison"):
    """Percent by which UBSS regret undercuts ``r_alg``; positive favours UBSS."""
    denom = r_alg if denominator == "comparison" else r_ubss
    return 100.0 * (r_alg - r_ubss) / denom


def theta_sweep(cfg, finals=None):
    """Mean and standard error of final regret per (theta, algorithm)."""
    ubss = [j for j, a in enumerate(cfg.algorithms) if a.name == "UBSS"]
    if not ubss:
        raise ConfigError("theta_sweep needs UBSS among the algorithms")
    ref = ubss[0]
    finals = final_regrets(cfg) if finals is None else finals
    rows = []
    for i, th in enumerate(cfg.theta_grid):
        r_ubss, _ = _mean_se(finals[(i, ref)])
        for j, spec in enumerate(cfg.algorithms):
            mean, se = _mean_se(finals[(i, j)])
            pct = None if j == ref else normalized_pct(mean, r_ubss, cfg.normalize_denominator)
            rows.append(SweepRow(th, spec.label, spec.s, mean, se, pct))
    return rows


def s_comparison(cfg, theta=5 * math.pi / 8, finals=None):
    """UBSS at each window length in ``cfg.s_values`` on shared seeds."""
    base = next((a for a in cfg.algorithms if a.name == "UBSS"), PolicySpec("UBSS"))
    specs = [base.with_params(s=int(s)) for s in cfg.s_values]
    finals = final_regrets(cfg, specs=specs, thetas=[theta]) if finals is None else finals
    rows = []
    for j, spec in enumerate(specs):
        mean, se = _mean_se(finals[(0, j)])
        rows.append(SweepRow(theta, spec.label, spec.s, mean, se, None))
    return rows


def diagnostics_curves(thetas):
    """Per theta: smallest observability-Gramian eigenvalue over both arms,
    the real part of the state matrix's eigenvalues, and the worst Lyapunov
    residual of the Gramians.

    The benchmark matrix is block upper-triangular with both diagonal
    blocks equal to ``0.9 R(theta)``, so its eigenvalues are those of that
    2x2 block and their real part is half the block's trace.
    """
    rows = []
    for th in thetas:
        params = make_rotation_lgds(th)
        g = params.gamma
        eigs, resid = [], 0.0
        for a in range(params.k):
            o = observability_gramian(params, a)
            c = params.actions[a]
            resid = max(resid, float(np.max(np.abs(o - g.T @ o @ g - np.outer(c, c)))))
            eigs.append(min_eig_sym(o))
        rows.append({
            "theta": float(th),
            "min_gramian_eig": float(min(eigs)),
            "eig_real_part": float(np.trace(g[:2, :2]) / 2),
            "gramian_residual": resid,
        })
    return rows


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_sweep_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "algorithm", "s", "mean_regret", "std_err", "normalized_vs_ubss_pct"])
        for r in rows:
            w.writerow([_fmt(r.theta), r.algorithm, _fmt(r.s), _fmt(r.mean_regret),
                        _fmt(r.std_err), _fmt(r.normalized_vs_ubss_pct)])
    return path


def write_diagnostics_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "min_gramian_eig", "eig_real_part"])
        for r in rows:
            w.writerow([_fmt(r["theta"]), _fmt(r["min_gramian_eig"]), _fmt(r["eig_real_part"])])
    return path


def write_episode_csv(result, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cum = result.cum_regret
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "action", "reward", "best_action", "best_mean", "chosen_mean",
                    "cum_regret"])
        for t in range(len(cum)):
            w.writerow([t, int(result.actions[t]), repr(float(result.rewards[t])),
                        int(result.best_actions[t]), repr(float(result.best_means[t])),
                        repr(float(result.chosen_means[t])), repr(float(cum[t]))])
    return path


def version_string():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_metadata(out_dir, cfg, command, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "version": version_string(),
        "config": cfg.to_dict() if cfg is not None else None,
        **(extra or {}),
    }
    path = out_dir / "metadata.json"
    path.write_text(json.dumps(doc, indent=2, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def verification_suite(cfg, trials=400, theta=5 * math.pi / 8, delta=0.1, seed=None):
    """Run every empirical check and return a list of JSON-ready dicts.

    Matrix facts are checked on the benchmark at every grid angle, bound
    coverage on the scalar system, and the regret bound against the mean
    UBSS regret at ``theta`` over ``cfg.reps`` replications.
    """
    from .environment import make_scalar_lgds
    from .filters import DominanceWarning, make_modified_kalman
    from .verification import (
        BoundInputs,
        check_lemma1_theorem1,
        check_model_error_bound,
        check_prediction_bound,
        estimate_xi_stats,
        evaluate_regret_bound,
    )

    seed = cfg.master_seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xC0DE,)))
    report = []
    for th in cfg.theta_grid:
        for res in check_lemma1_theorem1(cfg.params_for(th), rng):
            report.append({"theta": th, **res.to_dict()})

    scalar = make_scalar_lgds()
    scfg = ubss_config(PolicySpec("UBSS", {"s": 1, "delta": delta}), scalar)
    report.append(check_model_error_bound(scalar, scfg, trials, rng).to_dict())
    pred, dom = check_prediction_bound(scalar, scfg, trials, rng)
    report += [pred.to_dict(), dom.to_dict()]

    params = cfg.params_for(theta)
    base = next((a for a in cfg.algorithms if a.name == "UBSS"), PolicySpec("UBSS"))
    spec = _resolve_bounds(base.with_params(delta=delta), params)
    ucfg = ubss_config(spec, params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DominanceWarning)
        mk = make_modified_kalman(params)
    stats = estimate_xi_stats(
        params, lambda: make_policy(spec, params), ucfg.s, rounds=min(cfg.n, 2000),
        reps=4, rng=rng,
    )
    inputs = BoundInputs(
        sigma_xi=stats.sigma_xi, mean_xi_norm=stats.mean_norm, delta=delta, n=cfg.n,
        s=ucfg.s, lam=ucfg.lam, b_c=ucfg.b_c, b_r=ucfg.b_r, b_g=ucfg.b_g,
    )
    bound = evaluate_regret_bound(inputs, params, mk)
    finals = final_regrets(cfg, specs=[spec], thetas=[theta])[(0, 0)]
    mean, se = _mean_se(finals)
    report.append({
        "name": "regret_bound_dominates",
        "theta": theta,
        "bound": bound.total,
        "mean_regret": mean,
        "std_err": se,
        "level_main": bound.level_main,
        "level_appendix": bound.level_appendix,
        "passed": bool(bound.total >= mean),
    })
    return report
