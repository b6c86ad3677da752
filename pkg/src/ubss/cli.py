"""Command-line entry point.

Every subcommand resolves an :class:`~ubss.harness.ExperimentConfig` from
built-in defaults, an optional ``--config`` file, and then the flags given on
the command line (flags win). Invalid configurations exit with status 2.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .environment import LgdsParams
from .harness import (
    ConfigError,
    ExperimentConfig,
    PolicySpec,
    default_algorithms,
    diagnostics_curves,
    episode_seeds,
    final_regrets,
    run_episode,
    s_comparison,
    theta_grid,
    theta_sweep,
    verification_suite,
    write_diagnostics_csv,
    write_episode_csv,
    write_metadata,
    write_sweep_csv,
)

DEFAULT_THETA = 5 * math.pi / 8


def _common(p):
    p.add_argument("--config", type=Path, help="JSON or TOML experiment config")
    p.add_argument("--theta", type=float, action="append",
                   help="rotation angle in radians (repeatable)")
    p.add_argument("--theta-steps", type=int, help="evenly spaced angles on [0, 2pi)")
    p.add_argument("--n", type=int, help="rounds per episode")
    p.add_argument("--burn-in", type=int, help="unobserved transitions before round 1")
    p.add_argument("--reps", type=int, help="replications per cell")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--algo", action="append", help="UBSS, UCB, SW-UCB or Random (repeatable)")
    p.add_argument("--s", type=int, action="append", help="UBSS window length (repeatable)")
    p.add_argument("--delta", type=float, help="UBSS confidence parameter")
    p.add_argument("--lambda", dest="lam", type=float, help="UBSS ridge parameter")
    p.add_argument("--tau", type=int, help="SW-UCB window length")
    p.add_argument("--alpha", type=float, help="UCB exploration scale")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--normalize-denominator", choices=("comparison", "ubss"))
    p.add_argument("--system", type=Path, help="JSON system description to use instead "
                   "of the rotation benchmark")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ubss", description="Bandits on linear Gaussian dynamical systems."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("sweep", "regret of every algorithm across the theta grid"),
        ("episode", "one run with a full per-round log"),
        ("diagnostics", "observability Gramian and eigenvalue curves"),
        ("verify", "empirical checks of the filter and bound theory"),
        ("s-compare", "UBSS regret for several window lengths"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "verify":
            p.add_argument("--trials", type=int, default=400, help="coverage trials")
    return parser


def _apply_algo_flags(algorithms, args):
    out = []
    for spec in algorithms:
        kw = {}
        if spec.name == "UBSS":
            if args.s:
                kw["s"] = args.s[0]
            if args.delta is not None:
                kw["delta"] = args.delta
            if args.lam is not None:
                kw["lam"] = args.lam
        elif spec.name == "UCB" and args.alpha is not None:
            kw["alpha"] = args.alpha
        elif spec.name == "SW-UCB" and args.tau is not None:
            kw["tau"] = args.tau
        out.append(spec.with_params(**kw) if kw else spec)
    return out


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    doc = {}
    if args.config is not None:
        try:
            doc = ExperimentConfig.from_file(args.config).to_dict()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if args.theta:
        doc["theta_grid"] = list(args.theta)
    elif args.theta_steps is not None:
        doc["theta_grid"] = theta_grid(args.theta_steps)
    for key, attr in [("n", "n"), ("burn_in", "burn_in"), ("reps", "reps"),
                      ("master_seed", "seed"), ("workers", "workers"),
                      ("normalize_denominator", "normalize_denominator")]:
        value = getattr(args, attr)
        if value is not None:
            doc[key] = value
    if args.s:
        doc["s_values"] = list(args.s)
    if args.system is not None:
        try:
            doc["system"] = LgdsParams.from_json(args.system).to_dict()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read system {args.system}: {exc}") from exc
    algos = doc.get("algorithms") or default_algorithms()
    algos = [a if isinstance(a, PolicySpec) else PolicySpec(a["name"], a.get("params", {}))
             for a in algos]
    if args.algo:
        by_name = {a.name: a for a in algos}
        chosen = []
        for name in args.algo:
            spec = PolicySpec(name)
            chosen.append(by_name.get(spec.name, spec))
        algos = chosen
    doc["algorithms"] = _apply_algo_flags(algos, args)
    cfg = ExperimentConfig.from_dict(doc)
    if args.system is not None:
        try:
            cfg.params_for(0.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def _cmd_sweep(cfg, args):
    rows = theta_sweep(cfg)
    path = write_sweep_csv(rows, args.out / "sweep.csv")
    return path, {}


def _cmd_s_compare(cfg, args):
    theta = args.theta[0] if args.theta else DEFAULT_THETA
    rows = s_comparison(cfg, theta=theta)
    path = write_sweep_csv(rows, args.out / "s_compare.csv")
    return path, {"theta": theta}


def _cmd_diagnostics(cfg, args):
    rows = diagnostics_curves(cfg.theta_grid)
    path = write_diagnostics_csv(rows, args.out / "diagnostics.csv")
    worst = max(r["gramian_residual"] for r in rows)
    return path, {"max_gramian_residual": worst}


def _cmd_episode(cfg, args):
    theta = args.theta[0] if args.theta else DEFAULT_THETA
    spec = cfg.algorithms[0]
    params = cfg.params_for(theta)
    env_seed, pol_seed = episode_seeds(cfg.master_seed, 0, 0, spec.name)
    result = run_episode(params, spec, cfg.n, cfg.burn_in, env_seed, pol_seed)
    path = write_episode_csv(result, args.out / "episode.csv")
    if spec.name == "UBSS":
        (args.out / "agent.json").write_text(result.policy.dump_json())
    return path, {"theta": theta, "algorithm": spec.to_dict(),
                  "final_regret": result.final_regret}


def _cmd_verify(cfg, args):
    theta = DEFAULT_THETA if args.theta is None else args.theta[0]
    if args.theta is not None or args.theta_steps is not None or args.config is not None:
        grid_cfg = cfg
    else:
        grid_cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "theta_grid": theta_grid(16)})
    delta = args.delta if args.delta is not None else 0.1
    report = verification_suite(grid_cfg, trials=args.trials, theta=theta, delta=delta)
    path = args.out / "verification.json"
    path.write_text(json.dumps(report, indent=2, default=float))
    failed = [r["name"] for r in report if not r.get("passed", True)]
    return path, {"failed_checks": sorted(set(failed))}


COMMANDS = {
    "sweep": _cmd_sweep,
    "episode": _cmd_episode,
    "diagnostics": _cmd_diagnostics,
    "verify": _cmd_verify,
    "s-compare": _cmd_s_compare,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "s-compare" and not args.s and args.config is None:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "s_values": [1, 2, 3]})
    except ConfigError as exc:
        print(f"ubss: configuration error: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    path, extra = COMMANDS[args.command](cfg, args)
    write_metadata(args.out, cfg, " ".join(["ubss", *(argv or sys.argv[1:])]), extra)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
