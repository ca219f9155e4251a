"""RMSprop with momentum, plus global-norm gradient clipping."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RMSPropState:
    """Per-parameter squared-gradient averages and momentum buffers."""

    sq_avg: dict = field(default_factory=dict)
    momentum_buf: dict = field(default_factory=dict)
    sq_decay: float = 0.99
    momentum: float = 0.9
    eps: float = 1e-5

    @classmethod
    def for_params(cls, params: dict, **kwargs) -> "RMSPropState":
        state = cls(**kwargs)
        for name, value in params.items():
            state.sq_avg[name] = np.zeros_like(value, dtype=np.float64)
            state.momentum_buf[name] = np.zeros_like(value, dtype=np.float64)
        return state


def clip_gradients(grads: dict, max_norm: float = 1.0) -> dict:
    """Scale all gradients so their joint 2-norm is at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.square(g, dtype=np.float64)))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        return {k: g * scale for k, g in grads.items()}
    return grads


def rmsprop_step(
    params: dict,
    grads: dict,
    state: RMSPropState,
    lr: float,
    clip_norm: float = 1.0,
) -> None:
    """In-place parameter update.

    update = -lr * buf,  buf = momentum * buf + g / sqrt(sq_avg + eps),
    sq_avg = decay * sq_avg + (1 - decay) * g^2, after global-norm clipping.
    """
    if clip_norm is not None:
        grads = clip_gradients(grads, clip_norm)
    for name, g in grads.items():
        sq = state.sq_avg[name]
        buf = state.momentum_buf[name]
        sq *= state.sq_decay
        sq += (1.0 - state.sq_decay) * np.square(g, dtype=np.float64)
        buf *= state.momentum
        buf += g / np.sqrt(sq + state.eps)
        params[name] -= (lr * buf).astype(params[name].dtype)
