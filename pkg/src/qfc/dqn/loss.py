"""Temporal-difference loss with double-Q targets and Huber shaping."""

import numpy as np

from qfc.dqn.network import QNetwork


def huber(delta):
    """0.5 delta^2 inside |delta| < 1, |delta| - 0.5 outside."""
    delta = np.asarray(delta)
    small = np.abs(delta) < 1.0
    return np.where(small, 0.5 * delta**2, np.abs(delta) - 0.5)


def huber_grad(delta):
    return np.clip(delta, -1.0, 1.0)


def td_loss(
    batch: dict,
    online: QNetwork,
    target: QNetwork,
    gamma: float,
    weights=None,
    online_noise=None,
    target_noise=None,
):
    """(per-item |TD error|, per-item Huber loss, parameter gradients).

    The double-Q target picks the next action with the online network
    and evaluates it on the target network; terminal transitions drop
    the bootstrap.  Gradients flow only through Q_online(s, a), Huber
    shaped, importance weighted and mean reduced.
    """
    obs = batch["obs"]
    actions = np.asarray(batch["actions"], dtype=np.intp)
    rewards = np.asarray(batch["rewards"])
    next_obs = batch["next_obs"]
    terminal = np.asarray(batch["terminal"], dtype=bool)
    n = len(actions)
    if weights is None:
        weights = np.ones(n)

    q_next_online = online.forward(next_obs, noise=online_noise)
    best_next = np.argmax(q_next_online, axis=1)
    q_next_target = target.forward(next_obs, noise=target_noise)
    bootstrap = q_next_target[np.arange(n), best_next]
    targets = rewards + gamma * np.where(terminal, 0.0, bootstrap)

    q, cache = online.forward_cached(obs, noise=online_noise)
    delta = q[np.arange(n), actions] - targets
    losses = huber(delta)

    dq = np.zeros_like(q)
    dq[np.arange(n), actions] = weights * huber_grad(delta) / n
    grads = online.backward(dq, cache)
    return np.abs(delta), losses, grads
