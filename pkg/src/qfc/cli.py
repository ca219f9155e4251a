"""Command-line interface.

Subcommands: simulate, train, evaluate, surface, riccati, selftest.
Exit status: 0 on success, 2 on configuration errors, 3 on simulation or
training failures.
"""

import argparse
import os
import sys

import numpy as np

from qfc import evaluate as ev
from qfc import report
from qfc.config import (
    ConfigError,
    PRESETS,
    build_config,
    resolve_seed,
)
from qfc.riccati import RiccatiError, RiccatiProblem, care_residual, dare_residual, solve_care, solve_dare
from qfc.sde import StepFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3


def _common_flags(sub):
    sub.add_argument("--config", metavar="PATH", help="key=value config file")
    sub.add_argument("--preset", choices=PRESETS, help="paper parameter preset")
    sub.add_argument("--seed", type=int, help="master seed (QCTRL_SEED fallback)")
    sub.add_argument("--episodes", type=int, help="episode count")
    sub.add_argument("--out", metavar="DIR", help="output directory")
    sub.add_argument("--controller", help="controller kind")
    sub.add_argument("--checkpoint", help="DQN checkpoint path")
    sub.add_argument("--workers", type=int, help="episode worker processes (0 = auto)")


def _build(args):
    cli_values = {
        key: getattr(args, key, None)
        for key in ("seed", "episodes", "out", "controller", "checkpoint", "workers")
    }
    cfg = build_config(args.preset, args.config, cli_values)
    return type(cfg)(**{**cfg.__dict__, "seed": resolve_seed(cfg.seed)})


def _policy_for(cfg):
    if cfg.controller == "dqn":
        if not cfg.checkpoint:
            raise ConfigError("controller dqn requires --checkpoint")
        return ev.DqnPolicy.from_checkpoint(cfg.checkpoint)
    return cfg.policy()


def _out_dir(cfg) -> str:
    out = cfg.out or "qfc-out"
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _build(args)
    policy = _policy_for(cfg)
    params = cfg.sim_params()
    records = ev.run_episodes(
        cfg.problem, params, policy, cfg.episodes, cfg.seed, cfg.workers
    )
    out = _out_dir(cfg)
    report.write_episodes(os.path.join(out, "episodes.csv"), records)
    from qfc import figures

    label = "energy" if cfg.problem == "quartic" else "phonon number"
    figures.episode_figure(records, os.path.join(out, "episodes.png"), label)
    failures = sum(r.failed for r in records)
    print(f"{cfg.episodes} episodes -> {out}/episodes.csv ({failures} failed)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _build(args)
    policy = _policy_for(cfg)
    params = cfg.sim_params()
    if cfg.problem == "cooling":
        summary, records = ev.evaluate_cooling(
            policy, params, cfg.episodes, cfg.seed, cfg.workers
        )
    elif cfg.problem == "inverted":
        summary, records = ev.evaluate_inverted(
            policy, params, cfg.episodes, cfg.seed, cfg.workers
        )
    else:
        summary, records = ev.evaluate_quartic(
            policy, params, cfg.episodes, cfg.seed, cfg.workers
        )
    out = _out_dir(cfg)
    report.write_episodes(os.path.join(out, "episodes.csv"), records)
    report.write_summary(os.path.join(out, "summary.csv"), [summary])
    from qfc import figures

    label = "energy" if cfg.problem == "quartic" else "phonon number"
    figures.episode_figure(records, os.path.join(out, "episodes.png"), label)
    print(summary.line())
    return EXIT_OK


def cmd_surface(args) -> int:
    cfg = _build(args)
    policy = _policy_for(cfg)
    params = cfg.sim_params()
    extent = args.extent
    n = args.grid_size
    x_grid = np.linspace(-extent, extent, n)
    p_grid = np.linspace(-extent, extent, n)
    forces = ev.response_surface(policy, params, x_grid, p_grid)
    out = _out_dir(cfg)
    report.write_surface(os.path.join(out, "surface.csv"), x_grid, p_grid, forces)
    from qfc import figures

    figures.surface_figure(
        x_grid,
        p_grid,
        forces,
        os.path.join(out, "surface.svg"),
        title=f"{cfg.problem}: {cfg.controller}",
    )
    print(f"surface -> {out}/surface.csv, {out}/surface.svg")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _build(args)
    from qfc.dqn import NetworkSpec, TrainConfig, train
    from qfc.dqn.envs import CoolingMomentsEnv, InvertedMomentsEnv, QuarticMomentsEnv
    from qfc import figures

    t_max = args.t_max if args.t_max is not None else 10.0
    sim_cfg = type(cfg)(**{**cfg.__dict__, "t_max": t_max})
    params = sim_cfg.sim_params()
    if cfg.problem == "cooling":
        env = CoolingMomentsEnv(params)
        alpha = 0.4
    elif cfg.problem == "inverted":
        env = InvertedMomentsEnv(params)
        alpha = 0.8
    else:
        env = QuarticMomentsEnv(params)
        alpha = 0.4
    from qfc.dqn.replay import ReplaySettings

    episodes = cfg.episodes if cfg.episodes else 200
    config = TrainConfig(
        episodes=episodes,
        batch_size=args.batch_size,
        noise_groups=args.noise_groups,
        replay=ReplaySettings(alpha=alpha),
        replay_capacity=int(episodes * params.n_control_steps),
        min_buffer=4 * args.batch_size,
    )
    spec = NetworkSpec(variant="dense", input_dim=env.obs_dim)
    out = _out_dir(cfg)
    meta = {
        "meta/obs_scale": env.obs_scale.astype(np.float32),
        "meta/obs_shift": env.obs_shift.astype(np.float32),
    }
    rng = np.random.default_rng(cfg.seed)
    result = train(env, spec, config, rng, out_dir=out, checkpoint_meta=meta)
    report.write_metrics(os.path.join(out, "metrics.csv"), result.metrics)
    figures.training_figure(result.metrics, os.path.join(out, "training.png"))
    from qfc.dqn.checkpoint import save_checkpoint

    arrays = dict(result.best_params)
    arrays.update(meta)
    save_checkpoint(os.path.join(out, "qdqn_final.ckpt"), arrays)
    print(
        f"trained {episodes} episodes; best reward {result.best_reward:.3f}; "
        f"checkpoints in {out}"
    )
    return EXIT_OK


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([[float(v) for v in r.split(",")] for r in rows])


def cmd_riccati(args) -> int:
    problem = RiccatiProblem(
        F=_parse_matrix(args.F),
        G=_parse_matrix(args.G),
        R=_parse_matrix(args.R),
        Q=_parse_matrix(args.Q),
    )
    if args.kind == "care":
        p = solve_care(problem)
        res = care_residual(problem, p)
        gain = np.linalg.solve(problem.R, problem.G.T @ p)
        print(f"P = {p.tolist()}")
    else:
        p = solve_dare(problem)
        res = dare_residual(problem, p)
        gain = np.linalg.solve(
            problem.G.T @ p @ problem.G + problem.R, problem.G.T @ p @ problem.F
        )
        print(f"S = {p.tolist()}")
    print(f"K = {gain.tolist()}")
    print(f"residual = {res:.3e}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from qfc.selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_SIMULATION


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfc",
        description="measurement-feedback control benchmark for a 1D quantum particle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run episodes and write episodes.csv")
    _common_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    _common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("surface", help="render a controller response surface")
    _common_flags(p)
    p.add_argument("--grid-size", type=int, default=101)
    p.add_argument("--extent", type=float, default=3.0)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("train", help="smoke-scale DQN training")
    _common_flags(p)
    p.add_argument("--t-max", type=float, default=None, help="episode length")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--noise-groups", type=int, default=8)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("riccati", help="solve a CARE or DARE instance")
    p.add_argument("--kind", choices=("care", "dare"), default="care")
    p.add_argument("--F", required=True, help="rows ;-separated, entries ,-separated")
    p.add_argument("--G", required=True)
    p.add_argument("--R", required=True)
    p.add_argument("--Q", required=True)
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("selftest", help="run the fast invariant suite")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, RiccatiError) as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
