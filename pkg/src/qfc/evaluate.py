"""Evaluation protocols, episode batching and the response surface.

Episodes are independent jobs run on a process pool; episode i of a run
with master seed s uses the generator seeded by SeedSequence([s, i]), so
results are reproducible regardless of worker count and are assembled in
episode order.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from qfc import controllers as ctl
from qfc.controllers import ControlPolicy, StepSummary
from qfc.dqn.checkpoint import load_checkpoint
from qfc.dqn.envs import (
    reward_cooling_primary,
    reward_inverted,
    reward_quartic,
)
from qfc.dqn.network import NetworkSpec, QNetwork
from qfc.gaussian_model import steady_covariances
from qfc.oscillator import QuadraticParams, run_episode as run_quadratic_episode
from qfc.quartic import QuarticParams, run_episode as run_quartic_episode
from qfc.states import GaussianMoments

COOLING_WARMUP = 40.0
COOLING_SAMPLE_PERIOD = 15.0
QUARTIC_WARMUP = 40.0
QUARTIC_SAMPLE_PERIOD = 20.0


@dataclass(frozen=True)
class DqnPolicy:
    """Greedy zero-noise policy from a checkpoint (moments input)."""

    arrays: dict
    n_actions: int = 21

    @classmethod
    def from_checkpoint(cls, path) -> "DqnPolicy":
        return cls(arrays=load_checkpoint(path))

    def network(self) -> QNetwork:
        meta_keys = [k for k in self.arrays if k.startswith("meta/")]
        params = {k: v for k, v in self.arrays.items() if not k.startswith("meta/")}
        input_dim = params["fc0/v"].shape[1]
        hidden = []
        i = 0
        while f"fc{i}/v" in params:
            hidden.append(params[f"fc{i}/v"].shape[0])
            i += 1
        spec = NetworkSpec(
            variant="dense",
            input_dim=input_dim,
            n_actions=params["adv2/v"].shape[0],
            hidden=tuple(hidden),
            adv_hidden=params["adv1/v"].shape[0],
            val_hidden=params["val1/v"].shape[0],
        )
        return QNetwork(spec, params)

    def obs_transform(self):
        scale = self.arrays.get("meta/obs_scale")
        shift = self.arrays.get("meta/obs_shift")
        return scale, shift


def _dqn_controller(policy: DqnPolicy, levels: np.ndarray):
    net = policy.network()
    scale, shift = policy.obs_transform()

    def control(summary: StepSummary) -> float:
        obs = summary.moments.as_array()
        if shift is not None:
            obs = obs - shift
        if scale is not None:
            obs = obs * scale
        q = net.forward(obs.astype(np.float32))
        return float(levels[int(np.argmax(q))])

    return control


def build_controller(policy, params):
    """Controller callable + discreteness flag for a problem's params."""
    levels = ctl.force_levels(params.force_bounds)
    if isinstance(policy, DqnPolicy):
        return _dqn_controller(policy, levels), True
    if policy.kind == "zero":
        return ctl.zero_controller, False
    if isinstance(params, QuadraticParams):
        control = ctl.make_quadratic_controller(
            policy, params.k, params.m, params.control_dt, params.force_bounds
        )
        return control, policy.kind != "optimal_trajectory"
    control = ctl.make_quartic_controller(
        policy, params.lam, params.m, params.control_dt, params.force_bounds
    )
    return control, True


def _default_reward(problem: str):
    if problem == "cooling":
        return lambda res: reward_cooling_primary(res.phonon)
    if problem == "inverted":
        return lambda res: reward_inverted(res.phonon, res.failed)
    return lambda res: reward_quartic(res.energy)


def _episode_seed(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _run_one(args):
    problem, params, policy, seed, index = args
    rng = _episode_seed(seed, index)
    controller, discrete = build_controller(policy, params)
    reward_fn = _default_reward(problem)
    if problem == "quartic":
        return run_quartic_episode(
            controller, params, rng, discrete=discrete, reward_fn=reward_fn
        )
    return run_quadratic_episode(
        controller, params, rng, discrete=discrete, reward_fn=reward_fn
    )


def run_episodes(
    problem: str,
    params,
    policy,
    episodes: int,
    seed: int,
    workers: int = 0,
):
    """Episode records, in episode order, optionally on a process pool."""
    jobs = [(problem, params, policy, seed, i) for i in range(episodes)]
    if workers == 0:
        workers = min(os.cpu_count() or 1, 8, episodes)
    if workers <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=1))


@dataclass(frozen=True)
class EvalSummary:
    problem: str
    controller: str
    episodes: int
    n_samples: int
    mean: float
    se: float
    failures: int

    def line(self) -> str:
        return (
            f"{self.problem} {self.controller}: mean = {self.mean:.4f} "
            f"+- {self.se:.4f} ({self.n_samples} samples, "
            f"{self.failures}/{self.episodes} failed)"
        )


def _sample_times(t_max: float, warmup: float, period: float):
    times = []
    t = warmup + period
    while t <= t_max + 1e-9:
        times.append(t)
        t += period
    return times


def _collect_samples(record, times, values) -> list:
    out = []
    for t in times:
        idx = np.searchsorted(record.times, t - 1e-9)
        if idx < len(record.times) and abs(record.times[idx] - t) < 1e-6:
            out.append(values[idx])
    return out


def evaluate_cooling(
    policy, params: QuadraticParams, episodes: int, seed: int, workers: int = 0,
    records=None,
):
    """Mean phonon number +- SE, sampled every 15 after a 40 warmup."""
    if records is None:
        records = run_episodes("cooling", params, policy, episodes, seed, workers)
    times = _sample_times(params.t_max, COOLING_WARMUP, COOLING_SAMPLE_PERIOD)
    samples = []
    failures = 0
    for rec in records:
        samples.extend(_collect_samples(rec, times, rec.phonons))
        failures += bool(rec.failed)
    samples = np.array(samples)
    summary = EvalSummary(
        problem="cooling",
        controller=_policy_name(policy),
        episodes=episodes,
        n_samples=len(samples),
        mean=float(np.mean(samples)),
        se=float(np.std(samples, ddof=1) / np.sqrt(len(samples))),
        failures=failures,
    )
    return summary, records


def evaluate_inverted(
    policy, params: QuadraticParams, episodes: int, seed: int, workers: int = 0,
    records=None,
):
    """Success rate (1 - failure probability) with binomial SE."""
    if records is None:
        records = run_episodes("inverted", params, policy, episodes, seed, workers)
    failures = sum(bool(rec.failed) for rec in records)
    p = 1.0 - failures / episodes
    se = float(np.sqrt(p * (1 - p) / episodes))
    summary = EvalSummary(
        problem="inverted",
        controller=_policy_name(policy),
        episodes=episodes,
        n_samples=episodes,
        mean=p,
        se=se,
        failures=failures,
    )
    return summary, records


def evaluate_quartic(
    policy, params: QuarticParams, episodes: int, seed: int, workers: int = 0,
    records=None,
):
    """Mean energy +- SE, 3 samples per episode after the warmup."""
    if records is None:
        records = run_episodes("quartic", params, policy, episodes, seed, workers)
    times = _sample_times(params.t_max, QUARTIC_WARMUP, QUARTIC_SAMPLE_PERIOD)
    samples = []
    failures = 0
    for rec in records:
        samples.extend(_collect_samples(rec, times, rec.energies))
        failures += bool(rec.failed)
    samples = np.array(samples)
    summary = EvalSummary(
        problem="quartic",
        controller=_policy_name(policy),
        episodes=episodes,
        n_samples=len(samples),
        mean=float(np.mean(samples)),
        se=float(np.std(samples, ddof=1) / np.sqrt(len(samples))),
        failures=failures,
    )
    return summary, records


def _policy_name(policy) -> str:
    return "dqn" if isinstance(policy, DqnPolicy) else policy.kind


def response_surface(
    policy,
    params,
    x_grid: np.ndarray,
    p_grid: np.ndarray,
    covariances: Optional[tuple] = None,
):
    """Force surface over a (x, p) grid with covariances held fixed.

    Returns forces with shape (len(p_grid), len(x_grid)).  The default
    covariances are the steady values of the configured problem (for the
    quartic problem, the harmonic steady values at k = 2 lambda serve as
    the fixed shape).
    """
    if covariances is None:
        if isinstance(params, QuadraticParams):
            covariances = steady_covariances(
                params.k, params.m, params.gamma, params.eta
            )
        else:
            covariances = steady_covariances(
                2 * params.lam, params.m, params.gamma, params.eta
            )
    vx, vp, c = covariances
    controller, _ = build_controller(policy, params)
    forces = np.zeros((len(p_grid), len(x_grid)))
    for i, p in enumerate(p_grid):
        for j, x in enumerate(x_grid):
            moments = GaussianMoments(x, p, vx, vp, c)
            forces[i, j] = controller(StepSummary(moments=moments, x3=0.0))
    return forces
