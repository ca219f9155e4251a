"""Training loop: episode collection, prioritized updates, schedules.

A single process alternates acting and learning: the actor collects one
episode with epsilon-greedy exploration on top of the noisy network,
then the learner replays each stored experience `replays_per_experience`
times on average in prioritized minibatches.  The target network is
synchronized on a period that lengthens (30 -> 150 -> 300 steps) as the
achieved episode duration crosses the configured milestones.  Best
performers are re-evaluated twice before a checkpoint is accepted.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from qfc.dqn.checkpoint import save_checkpoint
from qfc.dqn.loss import td_loss
from qfc.dqn.network import NetworkSpec, QNetwork, sample_noise
from qfc.dqn.optim import RMSPropState, rmsprop_step
from qfc.dqn.replay import ReplayBuffer, ReplaySettings


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; the paper presets carry the cited table values."""

    episodes: int = 200
    discount: float = 0.99
    batch_size: int = 512
    noise_groups: int = 32
    lr_schedule: tuple = (2e-4, 4e-5, 8e-6, 2e-6, 1e-6)
    momentum: float = 0.9
    optimizer_eps: float = 1e-5
    clip_norm: float = 1.0
    target_periods: tuple = (30, 150, 300)
    target_milestones: tuple = (20.0, 50.0)  # achieved episode duration
    epsilon_start: float = 0.40
    epsilon_mid: float = 0.02
    epsilon_final: float = 1e-4
    epsilon_warm_fraction: float = 0.2
    epsilon_final_fraction: float = 0.8
    replay: ReplaySettings = field(default_factory=ReplaySettings)
    replay_capacity: int = 36_000
    replays_per_experience: float = 8.0
    min_buffer: int = 1024
    eval_repeats: int = 2
    noisy_sigma0: float = 0.5


def paper_cooling_config(**overrides) -> TrainConfig:
    base = dict(
        episodes=10_000,
        replay=ReplaySettings(alpha=0.4, replace_low_loss=0.9),
        replay_capacity=6000 * 1800,
        replays_per_experience=8.0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def paper_inverted_config(**overrides) -> TrainConfig:
    base = dict(
        episodes=30_000,
        replay=ReplaySettings(alpha=0.8, replace_low_loss=0.9),
        replay_capacity=6000 * 1800,
        replays_per_experience=8.0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def paper_quartic_config(**overrides) -> TrainConfig:
    base = dict(
        episodes=12_000,
        replay=ReplaySettings(alpha=0.4, replace_low_loss=0.8),
        replay_capacity=6000 * 1800,
        replays_per_experience=8.0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def epsilon_schedule(fraction: float, config: TrainConfig) -> float:
    """0.40 decaying to 0.02 over the warm fraction, then to the final value."""
    if fraction < config.epsilon_warm_fraction:
        t = fraction / config.epsilon_warm_fraction
        return config.epsilon_start + t * (config.epsilon_mid - config.epsilon_start)
    if fraction < config.epsilon_final_fraction:
        return config.epsilon_mid
    return config.epsilon_final


def learning_rate(fraction: float, config: TrainConfig) -> float:
    stages = len(config.lr_schedule)
    idx = min(int(fraction * stages), stages - 1)
    return config.lr_schedule[idx]


def target_period(best_duration: float, config: TrainConfig) -> int:
    period = config.target_periods[0]
    if best_duration >= config.target_milestones[0]:
        period = config.target_periods[1]
    if best_duration >= config.target_milestones[1]:
        period = config.target_periods[2]
    return period


@dataclass
class TrainResult:
    params: dict
    best_params: dict
    metrics: list  # rows: (episode, steps, reward, mean_loss, epsilon, lr)
    best_reward: float


def _collect_episode(env, net, spec, epsilon, rng):
    """One epsilon-greedy episode; returns (transitions, total_reward, duration).

    The actor's exploration noise is drawn once per episode (noises are
    sampled in advance), with epsilon-greedy on top.
    """
    obs = env.reset(rng)
    noise = sample_noise(spec, net.params, rng)
    transitions = []
    total_reward = 0.0
    while True:
        if rng.random() < epsilon:
            action = int(rng.integers(0, env.n_actions))
        else:
            action = int(np.argmax(net.forward(obs, noise=noise)))
        next_obs, reward, done = env.step(action)
        transitions.append((obs, action, reward, next_obs, done))
        total_reward += reward
        obs = next_obs
        if done:
            break
    return transitions, total_reward, env.duration


def _greedy_episode(env, net, rng):
    obs = env.reset(rng)
    total = 0.0
    while True:
        action = int(np.argmax(net.forward(obs)))
        obs, reward, done = env.step(action)
        total += reward
        if done:
            return total


def train(
    env,
    spec: NetworkSpec,
    config: TrainConfig,
    rng: np.random.Generator,
    out_dir=None,
    checkpoint_meta=None,
    progress=None,
) -> TrainResult:
    """Train a Q-network on a control environment.

    env must provide reset(rng) -> obs, step(action) -> (obs, reward,
    done), n_actions and duration.  Checkpoints of record performers go
    to out_dir when given; metadata arrays are merged into them.
    """
    net = QNetwork(spec)
    net.init_params(rng, noisy_sigma0=config.noisy_sigma0)
    target = QNetwork(spec, net.copy_params())
    opt = RMSPropState.for_params(
        net.params, momentum=config.momentum, eps=config.optimizer_eps
    )
    buffer = ReplayBuffer(config.replay_capacity, config.replay, rng)

    beta = config.replay.beta0
    train_steps = 0
    steps_since_sync = 0
    best_duration = 0.0
    best_reward = -np.inf
    best_params = net.copy_params()
    metrics = []

    for episode in range(config.episodes):
        fraction = episode / max(1, config.episodes)
        epsilon = epsilon_schedule(fraction, config)
        lr = learning_rate(fraction, config)

        transitions, ep_reward, duration = _collect_episode(
            env, net, spec, epsilon, rng
        )
        best_duration = max(best_duration, duration)
        for tr in transitions:
            buffer.add(tr)

        losses_seen = []
        if len(buffer) >= config.min_buffer:
            n_updates = max(
                1,
                math.ceil(
                    config.replays_per_experience
                    * len(transitions)
                    / config.batch_size
                ),
            )
            for _ in range(n_updates):
                indices, entries, weights = buffer.sample(config.batch_size, beta)
                batch = _stack_batch(entries)
                group_count = min(config.noise_groups, len(entries))
                bounds = np.linspace(0, len(entries), group_count + 1, dtype=int)
                grads_total = None
                deltas = np.zeros(len(entries))
                loss_sum = 0.0
                for g in range(group_count):
                    lo, hi = bounds[g], bounds[g + 1]
                    if lo == hi:
                        continue
                    sub = {k: v[lo:hi] for k, v in batch.items()}
                    onoise = sample_noise(spec, net.params, rng)
                    tnoise = sample_noise(spec, target.params, rng)
                    delta, losses, grads = td_loss(
                        sub,
                        net,
                        target,
                        config.discount,
                        weights=weights[lo:hi],
                        online_noise=onoise,
                        target_noise=tnoise,
                    )
                    deltas[lo:hi] = delta
                    loss_sum += float(np.sum(losses))
                    scale = (hi - lo) / len(entries)
                    if grads_total is None:
                        grads_total = {k: v * scale for k, v in grads.items()}
                    else:
                        for k, v in grads.items():
                            grads_total[k] += v * scale
                mean_loss = loss_sum / len(entries)
                if not np.isfinite(mean_loss):
                    raise TrainingDiverged(
                        f"non-finite loss at episode {episode}, step {train_steps}"
                    )
                rmsprop_step(net.params, grads_total, opt, lr, config.clip_norm)
                buffer.update_losses(indices, deltas)
                losses_seen.append(mean_loss)
                beta = min(1.0, beta + config.replay.beta_increment)
                train_steps += 1
                steps_since_sync += 1
                if steps_since_sync >= target_period(best_duration, config):
                    target.params = net.copy_params()
                    steps_since_sync = 0

        metrics.append(
            (
                episode,
                len(transitions),
                ep_reward,
                float(np.mean(losses_seen)) if losses_seen else np.nan,
                epsilon,
                lr,
            )
        )
        if progress is not None:
            progress(episode, metrics[-1])

        if ep_reward > best_reward:
            repeats = [
                _greedy_episode(env, net, rng) for _ in range(config.eval_repeats)
            ]
            candidate = float(np.mean([ep_reward] + repeats))
            if candidate > best_reward:
                best_reward = candidate
                best_params = net.copy_params()
                if out_dir is not None:
                    arrays = dict(best_params)
                    arrays.update(checkpoint_meta or {})
                    save_checkpoint(
                        f"{out_dir}/qdqn_best_{episode:06d}.ckpt", arrays
                    )

    return TrainResult(
        params=net.params,
        best_params=best_params,
        metrics=metrics,
        best_reward=best_reward,
    )


def _stack_batch(entries):
    obs = np.stack([e[0] for e in entries])
    actions = np.array([e[1] for e in entries], dtype=np.intp)
    rewards = np.array([e[2] for e in entries])
    next_obs = np.stack([e[3] for e in entries])
    terminal = np.array([e[4] for e in entries], dtype=bool)
    return {
        "obs": obs,
        "actions": actions,
        "rewards": rewards,
        "next_obs": next_obs,
        "terminal": terminal,
    }
